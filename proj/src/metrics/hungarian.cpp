#include <iostream>
#include <limits>

#include "diarkit/metrics.hpp"

namespace diarkit {

namespace {

// Minimum-cost assignment of every row of an n x m cost matrix (n <= m),
// shortest augmenting paths with potentials.
std::vector<int> min_cost_rows(const Eigen::MatrixXd &cost) {
  const long n = cost.rows(), m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<long> p(m + 1, 0), way(m + 1, 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const long i0 = p[j0];
      double delta = inf;
      long j1 = 0;
      for (long j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const long j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (long j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

std::vector<int> greedy(const Eigen::MatrixXd &w) {
  std::vector<int> out(w.rows(), -1);
  std::vector<bool> row_used(w.rows(), false), col_used(w.cols(), false);
  while (true) {
    long bi = -1, bj = -1;
    double best = 0.0;
    for (long i = 0; i < w.rows(); ++i) {
      if (row_used[i]) continue;
      for (long j = 0; j < w.cols(); ++j) {
        if (!col_used[j] && w(i, j) > best) {
          best = w(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    out[bi] = static_cast<int>(bj);
    row_used[bi] = col_used[bj] = true;
  }
  return out;
}

}  // namespace

std::vector<int> max_weight_assignment(const Eigen::MatrixXd &w) {
  if (w.rows() == 0 || w.cols() == 0) return std::vector<int>(w.rows(), -1);
  if (w.rows() > 64 || w.cols() > 64) {
    std::cerr << "warning: " << w.rows() << " x " << w.cols()
              << " speaker mapping solved greedily\n";
    return greedy(w);
  }
  if (w.rows() <= w.cols()) return min_cost_rows(-w);
  const std::vector<int> col_to_row = min_cost_rows(-w.transpose());
  std::vector<int> out(w.rows(), -1);
  for (std::size_t j = 0; j < col_to_row.size(); ++j) {
    if (col_to_row[j] >= 0) out[col_to_row[j]] = static_cast<int>(j);
  }
  return out;
}

}  // namespace diarkit
