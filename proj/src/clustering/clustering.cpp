#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diarkit/clustering.hpp"
#include "diarkit/embedding.hpp"

namespace diarkit {

Eigen::MatrixXd cosine_distances(const std::vector<Eigen::RowVectorXd> &emb) {
  const long n = static_cast<long>(emb.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = std::clamp(1.0 - emb[i].dot(emb[j]), 0.0, 2.0);
    }
  }
  return d;
}

AffinityMatrix affinity(const std::vector<Eigen::RowVectorXd> &emb,
                        std::vector<Segment> items) {
  if (items.size() != emb.size()) {
    throw std::invalid_argument("affinity: one item per embedding");
  }
  return {cosine_distances(emb), std::move(items)};
}

std::pair<long, long> frames_of(const Segment &s, const SlidingWindowGeometry &g,
                                long total_frames) {
  auto first_at = [&](double t) {
    return static_cast<long>(
        std::ceil((t - g.start - 0.5 * g.window) / g.step - 1e-9));
  };
  long first = std::clamp(first_at(s.start), 0L, total_frames - 1);
  long end = std::clamp(first_at(s.end), first + 1, total_frames);
  return {first, end - first};
}

std::vector<Eigen::RowVectorXd> turn_embeddings(
    const nn::SequenceModel &model, const SlidingWindowFeature &features,
    const Timeline &turns, long chunk_frames) {
  std::vector<Eigen::RowVectorXd> out;
  for (const auto &t : turns) {
    const auto [first, n] = frames_of(t, features.geometry, features.frames());
    out.push_back(embed_span(model, features.data, first, n, chunk_frames));
  }
  return out;
}

std::vector<int> agglomerate(const Eigen::MatrixXd &distances, double threshold) {
  const long n = distances.rows();
  if (distances.cols() != n) throw std::invalid_argument("agglomerate: not square");
  Eigen::MatrixXd d = distances;
  std::vector<long> parent(n);
  std::vector<bool> active(n, true);
  for (long i = 0; i < n; ++i) parent[i] = i;

  while (true) {
    long bi = -1, bj = -1;
    double best = 0.0;
    for (long i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (long j = i + 1; j < n; ++j) {
        if (active[j] && (bi < 0 || d(i, j) < best)) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0 || !(best < threshold)) break;
    for (long k = 0; k < n; ++k) {
      d(bi, k) = d(k, bi) = std::max(d(bi, k), d(bj, k));
    }
    active[bj] = false;
    for (long k = 0; k < n; ++k) {
      if (parent[k] == bj) parent[k] = bi;
    }
  }

  std::vector<int> labels(n, -1);
  int next = 0;
  std::vector<int> id(n, -1);
  for (long i = 0; i < n; ++i) {
    if (id[parent[i]] < 0) id[parent[i]] = next++;
    labels[i] = id[parent[i]];
  }
  return labels;
}

}  // namespace diarkit
