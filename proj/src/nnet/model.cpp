#include <cmath>
#include <stdexcept>

#include "diarkit/nnet.hpp"

namespace diarkit::nn {

int ParamSet::add(std::string name, long rows, long cols) {
  for (const auto &e : entries_) {
    if (e.name == name) throw std::invalid_argument("duplicate param " + name);
  }
  const long offset = size();
  entries_.push_back({std::move(name), rows, cols, offset});
  values_.conservativeResize(offset + rows * cols);
  values_.tail(rows * cols).setZero();
  return static_cast<int>(entries_.size()) - 1;
}

int ParamSet::index(const std::string &name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown parameter " + name);
}

Eigen::Map<Matrix> ParamSet::view(int i) {
  const auto &e = entries_[i];
  return {values_.data() + e.offset, e.rows, e.cols};
}

Eigen::Map<const Matrix> ParamSet::view(int i) const {
  const auto &e = entries_[i];
  return {values_.data() + e.offset, e.rows, e.cols};
}

BoundParams::BoundParams(Tape &tape, const ParamSet &params,
                         bool requires_grad)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.entries().size());
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    Matrix v = params.view(static_cast<int>(i));
    vars_.push_back(requires_grad ? tape.variable(std::move(v))
                                  : tape.constant(std::move(v)));
  }
}

Eigen::VectorXd BoundParams::gradient() const {
  Eigen::VectorXd g(params_->size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto &e = params_->entries()[i];
    const Matrix gi = tape_->grad(vars_[i]);
    g.segment(e.offset, e.rows * e.cols) =
        Eigen::Map<const Eigen::VectorXd>(gi.data(), gi.size());
  }
  return g;
}

std::string to_string(Cell c) {
  switch (c) {
    case Cell::lstm: return "lstm";
    case Cell::gru: return "gru";
    case Cell::tanh: return "tanh";
  }
  return "?";
}

std::string to_string(Pooling p) {
  return p == Pooling::none ? "none" : "stats";
}

std::string to_string(Head h) {
  return h == Head::softmax ? "softmax" : "embedding";
}

Cell cell_from_string(const std::string &s) {
  if (s == "lstm") return Cell::lstm;
  if (s == "gru") return Cell::gru;
  if (s == "tanh") return Cell::tanh;
  throw std::invalid_argument("unknown cell '" + s + "'");
}

Pooling pooling_from_string(const std::string &s) {
  if (s == "none") return Pooling::none;
  if (s == "stats") return Pooling::stats;
  throw std::invalid_argument("unknown pooling '" + s + "'");
}

Head head_from_string(const std::string &s) {
  if (s == "softmax") return Head::softmax;
  if (s == "embedding") return Head::embedding;
  throw std::invalid_argument("unknown head '" + s + "'");
}

void ArchSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("arch: input_dim < 1");
  if (recurrent_layers < 1) {
    throw std::invalid_argument("arch: at least one recurrent layer");
  }
  if (recurrent_units < 1) throw std::invalid_argument("arch: units < 1");
  if (output_dim < 1) throw std::invalid_argument("arch: output_dim < 1");
  for (int w : ff_layers) {
    if (w < 1) throw std::invalid_argument("arch: ff width < 1");
  }
  if ((pooling == Pooling::stats) != (head == Head::embedding)) {
    throw std::invalid_argument(
        "arch: stats pooling goes with the embedding head, no pooling with "
        "the softmax head");
  }
}

namespace {

std::string rnn_name(int layer, int dir, const char *what) {
  return "rnn" + std::to_string(layer) + (dir == 0 ? ".fwd." : ".bwd.") + what;
}

void glorot(Eigen::Map<Matrix> m, std::mt19937_64 &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (long j = 0; j < m.cols(); ++j) {
    for (long i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
}

}  // namespace

SequenceModel::SequenceModel(ArchSpec arch, unsigned long long seed)
    : arch_(std::move(arch)) {
  arch_.validate();
  build_params();
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.entries().size(); ++i) {
    const auto &e = params_.entries()[i];
    const bool is_bias = e.rows == 1;
    if (!is_bias) glorot(params_.view(static_cast<int>(i)), rng);
  }
  if (arch_.cell == Cell::lstm) {
    const long h = arch_.recurrent_units;
    for (int l = 0; l < arch_.recurrent_layers; ++l) {
      for (int d = 0; d < 2; ++d) {
        params_.view(rnn_name(l, d, "b")).middleCols(h, h).setOnes();
      }
    }
  }
}

void SequenceModel::build_params() {
  const long h = arch_.recurrent_units;
  const long g = arch_.gates() * h;
  long in = arch_.input_dim;
  for (int l = 0; l < arch_.recurrent_layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      params_.add(rnn_name(l, d, "W"), in, g);
      params_.add(rnn_name(l, d, "U"), h, g);
      params_.add(rnn_name(l, d, "b"), 1, g);
      if (arch_.cell == Cell::gru) params_.add(rnn_name(l, d, "bh"), 1, g);
    }
    in = 2 * h;
  }
  if (arch_.pooling == Pooling::stats) in *= 2;
  for (std::size_t i = 0; i < arch_.ff_layers.size(); ++i) {
    params_.add("ff" + std::to_string(i) + ".W", in, arch_.ff_layers[i]);
    params_.add("ff" + std::to_string(i) + ".b", 1, arch_.ff_layers[i]);
    in = arch_.ff_layers[i];
  }
  params_.add("out.W", in, arch_.output_dim);
  params_.add("out.b", 1, arch_.output_dim);
}

namespace {

// One direction of one recurrent layer over a t-major batch.
Var run_direction(Tape &tape, const BoundParams &p, const ArchSpec &arch,
                  int layer, int dir, const Var &x, long steps, long batch) {
  const long h = arch.recurrent_units;
  const Var &w = p[rnn_name(layer, dir, "W")];
  const Var &u = p[rnn_name(layer, dir, "U")];
  const Var &b = p[rnn_name(layer, dir, "b")];
  const Var projected = add_row(matmul(x, w), b);

  Var state = tape.constant(Matrix::Zero(batch, h));
  Var cell = tape.constant(Matrix::Zero(batch, h));
  std::vector<Var> outputs(steps);
  for (long s = 0; s < steps; ++s) {
    const long t = dir == 0 ? s : steps - 1 - s;
    const Var xt = rows(projected, t * batch, batch);
    switch (arch.cell) {
      case Cell::tanh:
        state = tanh(add(xt, matmul(state, u)));
        break;
      case Cell::lstm: {
        const Var gates = add(xt, matmul(state, u));
        const Var i = sigmoid(cols(gates, 0, h));
        const Var f = sigmoid(cols(gates, h, h));
        const Var g = tanh(cols(gates, 2 * h, h));
        const Var o = sigmoid(cols(gates, 3 * h, h));
        cell = add(mul(f, cell), mul(i, g));
        state = mul(o, tanh(cell));
        break;
      }
      case Cell::gru: {
        const Var hh = add_row(matmul(state, u), p[rnn_name(layer, dir, "bh")]);
        const Var r = sigmoid(add(cols(xt, 0, h), cols(hh, 0, h)));
        const Var z = sigmoid(add(cols(xt, h, h), cols(hh, h, h)));
        const Var n = tanh(add(cols(xt, 2 * h, h), mul(r, cols(hh, 2 * h, h))));
        // (1 - z) n + z h = n + z (h - n)
        state = add(n, mul(z, sub(state, n)));
        break;
      }
    }
    outputs[t] = state;
  }
  return vcat(outputs);
}

}  // namespace

Var SequenceModel::encode(Tape &tape, const BoundParams &p, const Matrix &x,
                          long steps, long batch) const {
  if (x.cols() != arch_.input_dim) {
    throw std::invalid_argument("input has " + std::to_string(x.cols()) +
                                " dims, model expects " +
                                std::to_string(arch_.input_dim));
  }
  if (x.rows() != steps * batch) throw std::invalid_argument("encode: rows");
  Var layer_in = tape.constant(x);
  for (int l = 0; l < arch_.recurrent_layers; ++l) {
    const Var both[] = {
        run_direction(tape, p, arch_, l, 0, layer_in, steps, batch),
        run_direction(tape, p, arch_, l, 1, layer_in, steps, batch)};
    layer_in = hcat(both);
  }
  return layer_in;
}

Var SequenceModel::forward(Tape &tape, const BoundParams &p, const Matrix &x,
                           long steps, long batch) const {
  Var z = encode(tape, p, x, steps, batch);
  if (arch_.pooling == Pooling::stats) z = time_stats(z, steps, batch);
  for (std::size_t i = 0; i < arch_.ff_layers.size(); ++i) {
    const std::string n = "ff" + std::to_string(i);
    z = tanh(add_row(matmul(z, p[n + ".W"]), p[n + ".b"]));
  }
  z = add_row(matmul(z, p["out.W"]), p["out.b"]);
  if (arch_.head == Head::embedding) z = l2_normalize_rows(z);
  return z;
}

Matrix stack_time_major(const std::vector<Matrix> &sequences) {
  if (sequences.empty()) return {};
  const long b = static_cast<long>(sequences.size());
  const long steps = sequences[0].rows();
  const long d = sequences[0].cols();
  Matrix x(steps * b, d);
  for (long i = 0; i < b; ++i) {
    if (sequences[i].rows() != steps || sequences[i].cols() != d) {
      throw std::invalid_argument("sequences of different shapes");
    }
    for (long t = 0; t < steps; ++t) x.row(t * b + i) = sequences[i].row(t);
  }
  return x;
}

Matrix SequenceModel::predict(const Matrix &sequence) const {
  return predict(std::vector<Matrix>{sequence}).front();
}

std::vector<Matrix> SequenceModel::predict(
    const std::vector<Matrix> &sequences) const {
  if (sequences.empty()) return {};
  const long b = static_cast<long>(sequences.size());
  const long steps = sequences[0].rows();
  Tape tape;
  BoundParams p(tape, params_, false);
  Var out = forward(tape, p, stack_time_major(sequences), steps, b);
  std::vector<Matrix> result(b);
  if (arch_.head == Head::embedding) {
    for (long i = 0; i < b; ++i) result[i] = out.value().row(i);
    return result;
  }
  const Matrix probs = softmax(out).value();
  for (long i = 0; i < b; ++i) {
    result[i].resize(steps, probs.cols());
    for (long t = 0; t < steps; ++t) result[i].row(t) = probs.row(t * b + i);
  }
  return result;
}

}  // namespace diarkit::nn
