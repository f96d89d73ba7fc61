#include "diarkit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diarkit::nn {

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool req = false;
  for (const auto &v : inputs) {
    if (v.tape() != this) throw std::logic_error("variable from another tape");
    req = req || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(
      {std::move(value), Matrix(), req, req ? std::move(backward) : nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(const Var &out) {
  if (out.rows() != 1 || out.cols() != 1) {
    throw std::logic_error("backward() needs a scalar output");
  }
  for (auto &n : nodes_) n.grad.resize(0, 0);
  nodes_[out.id()].grad = Matrix::Ones(1, 1);
  for (int i = out.id(); i >= 0; --i) {
    auto &n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Matrix Tape::grad(const Var &v) const {
  const auto &n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix &g) { accumulate_expr(id, g); }

namespace {

void check_same_shape(const Var &a, const Var &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

template <typename F, typename D>
Var unary(const Var &a, F f, D dfdx_from_y) {
  Tape &t = *a.tape();
  Matrix y = a.value().unaryExpr(f);
  const int ia = a.id();
  const Var in[] = {a};
  return t.push(std::move(y), in, [ia, dfdx_from_y](Tape &t, int self) {
    const Matrix &y = t.value(self);
    const Matrix &x = t.value(ia);
    t.accumulate_expr(ia, t.out_grad(self).cwiseProduct(
                              x.binaryExpr(y, dfdx_from_y)));
  });
}

}  // namespace

Var matmul(const Var &a, const Var &b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shapes");
  Tape &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return t.push(a.value() * b.value(), in, [ia, ib](Tape &t, int self) {
    const Matrix &g = t.out_grad(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var transpose(const Var &a) {
  Tape &t = *a.tape();
  const int ia = a.id();
  const Var in[] = {a};
  return t.push(a.value().transpose(), in, [ia](Tape &t, int self) {
    t.accumulate_expr(ia, t.out_grad(self).transpose());
  });
}

Var add(const Var &a, const Var &b) {
  check_same_shape(a, b, "add");
  Tape &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return t.push(a.value() + b.value(), in, [ia, ib](Tape &t, int self) {
    t.accumulate_expr(ia, t.out_grad(self));
    t.accumulate_expr(ib, t.out_grad(self));
  });
}

Var sub(const Var &a, const Var &b) {
  check_same_shape(a, b, "sub");
  Tape &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return t.push(a.value() - b.value(), in, [ia, ib](Tape &t, int self) {
    t.accumulate_expr(ia, t.out_grad(self));
    t.accumulate_expr(ib, -t.out_grad(self));
  });
}

Var mul(const Var &a, const Var &b) {
  check_same_shape(a, b, "mul");
  Tape &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return t.push(a.value().cwiseProduct(b.value()), in,
                [ia, ib](Tape &t, int self) {
                  const Matrix &g = t.out_grad(self);
                  t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
                  t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
                });
}

Var scale(const Var &a, double c) {
  Tape &t = *a.tape();
  const int ia = a.id();
  const Var in[] = {a};
  return t.push(a.value() * c, in, [ia, c](Tape &t, int self) {
    t.accumulate_expr(ia, t.out_grad(self) * c);
  });
}

Var add_row(const Var &a, const Var &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: shapes");
  }
  Tape &t = *a.tape();
  const int ia = a.id(), ir = row.id();
  const Var in[] = {a, row};
  Matrix y = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(y), in, [ia, ir](Tape &t, int self) {
    const Matrix &g = t.out_grad(self);
    t.accumulate_expr(ia, g);
    if (t.requires_grad(ir)) t.accumulate_expr(ir, g.colwise().sum());
  });
}

Var tanh(const Var &a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var &a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var &a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(const Var &a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var sum(const Var &a) {
  Tape &t = *a.tape();
  const int ia = a.id();
  const long r = a.rows(), c = a.cols();
  const Var in[] = {a};
  return t.push(Matrix::Constant(1, 1, a.value().sum()), in,
                [ia, r, c](Tape &t, int self) {
                  t.accumulate_expr(
                      ia, Matrix::Constant(r, c, t.out_grad(self)(0, 0)));
                });
}

Var mean(const Var &a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var rows(const Var &a, long start, long n) {
  if (start < 0 || start + n > a.rows()) throw std::out_of_range("rows");
  Tape &t = *a.tape();
  const int ia = a.id();
  const long r = a.rows(), c = a.cols();
  const Var in[] = {a};
  return t.push(a.value().middleRows(start, n), in,
                [ia, start, n, r, c](Tape &t, int self) {
                  if (!t.requires_grad(ia)) return;
                  Matrix g = Matrix::Zero(r, c);
                  g.middleRows(start, n) = t.out_grad(self);
                  t.accumulate(ia, g);
                });
}

Var cols(const Var &a, long start, long n) {
  if (start < 0 || start + n > a.cols()) throw std::out_of_range("cols");
  Tape &t = *a.tape();
  const int ia = a.id();
  const long r = a.rows(), c = a.cols();
  const Var in[] = {a};
  return t.push(a.value().middleCols(start, n), in,
                [ia, start, n, r, c](Tape &t, int self) {
                  if (!t.requires_grad(ia)) return;
                  Matrix g = Matrix::Zero(r, c);
                  g.middleCols(start, n) = t.out_grad(self);
                  t.accumulate(ia, g);
                });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no parts");
  Tape &t = *parts[0].tape();
  long rows_total = 0;
  const long c = parts[0].cols();
  for (const auto &p : parts) {
    if (p.cols() != c) throw std::invalid_argument("vcat: column mismatch");
    rows_total += p.rows();
  }
  Matrix y(rows_total, c);
  std::vector<int> ids;
  std::vector<long> offsets;
  long off = 0;
  for (const auto &p : parts) {
    y.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return t.push(std::move(y), parts, [ids, offsets](Tape &t, int self) {
    const Matrix &g = t.out_grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      t.accumulate_expr(ids[k],
                        g.middleRows(offsets[k], t.value(ids[k]).rows()));
    }
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no parts");
  Tape &t = *parts[0].tape();
  long cols_total = 0;
  const long r = parts[0].rows();
  for (const auto &p : parts) {
    if (p.rows() != r) throw std::invalid_argument("hcat: row mismatch");
    cols_total += p.cols();
  }
  Matrix y(r, cols_total);
  std::vector<int> ids;
  std::vector<long> offsets;
  long off = 0;
  for (const auto &p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return t.push(std::move(y), parts, [ids, offsets](Tape &t, int self) {
    const Matrix &g = t.out_grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      t.accumulate_expr(ids[k],
                        g.middleCols(offsets[k], t.value(ids[k]).cols()));
    }
  });
}

namespace {

Matrix row_softmax(const Matrix &x) {
  Matrix y(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace

Var softmax(const Var &logits) {
  Tape &t = *logits.tape();
  const int il = logits.id();
  const Var in[] = {logits};
  return t.push(row_softmax(logits.value()), in, [il](Tape &t, int self) {
    const Matrix &y = t.value(self);
    const Matrix &g = t.out_grad(self);
    // dx = y * (g - <g, y>) row-wise
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix dx = y.cwiseProduct(g.colwise() - dot);
    t.accumulate(il, dx);
  });
}

Var softmax_cross_entropy(const Var &logits, std::span<const int> labels,
                          std::span<const double> class_weights) {
  const long n = logits.rows(), k = logits.cols();
  if (static_cast<long>(labels.size()) != n) {
    throw std::invalid_argument("softmax_cross_entropy: label count");
  }
  Tape &t = *logits.tape();
  Matrix p = row_softmax(logits.value());
  std::vector<double> w(n, 1.0);
  double total_w = 0.0, loss = 0.0;
  for (long i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= k) throw std::out_of_range("label out of range");
    if (!class_weights.empty()) w[i] = class_weights[y];
    total_w += w[i];
    loss -= w[i] * std::log(std::max(p(i, y), 1e-300));
  }
  if (total_w <= 0.0) throw std::invalid_argument("zero total class weight");
  loss /= total_w;
  const int il = logits.id();
  std::vector<int> lab(labels.begin(), labels.end());
  const Var in[] = {logits};
  return t.push(Matrix::Constant(1, 1, loss), in,
                [il, p = std::move(p), lab = std::move(lab), w = std::move(w),
                 total_w](Tape &t, int self) {
                  Matrix d = p;
                  for (std::size_t i = 0; i < lab.size(); ++i) {
                    d(i, lab[i]) -= 1.0;
                    d.row(i) *= w[i];
                  }
                  t.accumulate(il, d * (t.out_grad(self)(0, 0) / total_w));
                });
}

Var l2_normalize_rows(const Var &a) {
  Tape &t = *a.tape();
  const Eigen::VectorXd norms = a.value().rowwise().norm().cwiseMax(1e-12);
  Matrix y = a.value().array().colwise() / norms.array();
  const int ia = a.id();
  const Var in[] = {a};
  return t.push(std::move(y), in, [ia, norms](Tape &t, int self) {
    const Matrix &y = t.value(self);
    const Matrix &g = t.out_grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    // Row-wise (g - y <y, g>) / |x|.
    Matrix dx(g.rows(), g.cols());
    for (long i = 0; i < dx.rows(); ++i) {
      dx.row(i) = (g.row(i) - dot(i) * y.row(i)) / norms(i);
    }
    t.accumulate(ia, dx);
  });
}

Var time_stats(const Var &a, long steps, long batch) {
  if (a.rows() != steps * batch) throw std::invalid_argument("time_stats");
  Tape &t = *a.tape();
  const long h = a.cols();
  const Matrix &x = a.value();
  Matrix mu = Matrix::Zero(batch, h);
  for (long s = 0; s < steps; ++s) mu += x.middleRows(s * batch, batch);
  mu /= static_cast<double>(steps);
  Matrix var = Matrix::Zero(batch, h);
  for (long s = 0; s < steps; ++s) {
    var += (x.middleRows(s * batch, batch) - mu).array().square().matrix();
  }
  var /= static_cast<double>(steps);
  Matrix sd = var.cwiseSqrt();
  Matrix y(batch, 2 * h);
  y << mu, sd;
  const int ia = a.id();
  const Var in[] = {a};
  return t.push(std::move(y), in,
                [ia, steps, batch, h, mu, sd](Tape &t, int self) {
                  const Matrix &g = t.out_grad(self);
                  const Matrix &x = t.value(ia);
                  const Matrix gm = g.leftCols(h) / static_cast<double>(steps);
                  // d sd / d x = (x - mu) / (T sd); zero where sd vanishes.
                  Matrix gs = Matrix::Zero(batch, h);
                  for (long b = 0; b < batch; ++b) {
                    for (long j = 0; j < h; ++j) {
                      if (sd(b, j) > 1e-12) {
                        gs(b, j) = g(b, h + j) / (steps * sd(b, j));
                      }
                    }
                  }
                  Matrix dx(x.rows(), h);
                  for (long s = 0; s < steps; ++s) {
                    dx.middleRows(s * batch, batch) =
                        gm + gs.cwiseProduct(x.middleRows(s * batch, batch) - mu);
                  }
                  t.accumulate(ia, dx);
                });
}

Var triplet_hinge(const Var &dist, std::span<const int> labels,
                  double margin) {
  const long n = dist.rows();
  if (dist.cols() != n || static_cast<long>(labels.size()) != n) {
    throw std::invalid_argument("triplet_hinge: shapes");
  }
  const Matrix &d = dist.value();
  Matrix dd = Matrix::Zero(n, n);
  double loss = 0.0;
  long count = 0;
  for (long a = 0; a < n; ++a) {
    for (long p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (long q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        ++count;
        const double v = d(a, p) - d(a, q) + margin;
        if (v > 0.0) {
          loss += v;
          dd(a, p) += 1.0;
          dd(a, q) -= 1.0;
        }
      }
    }
  }
  if (count == 0) {
    throw std::invalid_argument("triplet loss needs two speakers with two "
                                "samples each");
  }
  loss /= static_cast<double>(count);
  dd /= static_cast<double>(count);
  Tape &t = *dist.tape();
  const int id = dist.id();
  const Var in[] = {dist};
  return t.push(Matrix::Constant(1, 1, loss), in,
                [id, dd = std::move(dd)](Tape &t, int self) {
                  t.accumulate(id, dd * t.out_grad(self)(0, 0));
                });
}

Var contrastive_pairs(const Var &dist, std::span<const int> labels,
                      double margin) {
  const long n = dist.rows();
  if (dist.cols() != n || static_cast<long>(labels.size()) != n || n < 2) {
    throw std::invalid_argument("contrastive_pairs: shapes");
  }
  const Matrix &d = dist.value();
  Matrix dd = Matrix::Zero(n, n);
  double loss = 0.0;
  const double pairs = 0.5 * static_cast<double>(n * (n - 1));
  for (long i = 0; i < n; ++i) {
    for (long j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) {
        loss += d(i, j) * d(i, j);
        dd(i, j) = 2.0 * d(i, j);
      } else {
        const double gap = std::max(0.0, margin - d(i, j));
        loss += gap * gap;
        dd(i, j) = -2.0 * gap;
      }
    }
  }
  loss /= pairs;
  dd /= pairs;
  Tape &t = *dist.tape();
  const int id = dist.id();
  const Var in[] = {dist};
  return t.push(Matrix::Constant(1, 1, loss), in,
                [id, dd = std::move(dd)](Tape &t, int self) {
                  t.accumulate(id, dd * t.out_grad(self)(0, 0));
                });
}

Var angular_margin_logits(const Var &cosines, std::span<const int> labels,
                          double margin, double scale_factor) {
  const long n = cosines.rows(), c = cosines.cols();
  if (static_cast<long>(labels.size()) != n) {
    throw std::invalid_argument("angular_margin_logits: label count");
  }
  const double cm = std::cos(margin), sm = std::sin(margin);
  const double lim = 1.0 - 1e-7;
  Matrix y = cosines.value() * scale_factor;
  Matrix deriv = Matrix::Constant(n, c, scale_factor);
  for (long i = 0; i < n; ++i) {
    const int k = labels[i];
    if (k < 0 || k >= c) throw std::out_of_range("label out of range");
    const double x = std::clamp(cosines.value()(i, k), -lim, lim);
    const double sn = std::sqrt(1.0 - x * x);
    y(i, k) = scale_factor * (x * cm - sn * sm);
    deriv(i, k) = scale_factor * (cm + x * sm / sn);
  }
  Tape &t = *cosines.tape();
  const int id = cosines.id();
  const Var in[] = {cosines};
  return t.push(std::move(y), in,
                [id, deriv = std::move(deriv)](Tape &t, int self) {
                  t.accumulate(id, t.out_grad(self).cwiseProduct(deriv));
                });
}

}  // namespace diarkit::nn
