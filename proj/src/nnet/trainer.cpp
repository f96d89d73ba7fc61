#include <cmath>
#include <stdexcept>

#include "diarkit/nnet.hpp"

namespace diarkit::nn {

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(const std::string &s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

void TrainSpec::validate() const {
  if (!(chunk_duration > 0.0)) {
    throw std::invalid_argument("train: chunk_duration must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs < 0");
  if (lr < 0.0) throw std::invalid_argument("train: lr must be >= 0");
  if (clip_norm < 0.0) throw std::invalid_argument("train: clip_norm < 0");
}

Optimizer::Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

void Optimizer::step(Eigen::VectorXd &values, const Eigen::VectorXd &grad) {
  if (kind_ == OptimizerKind::sgd) {
    values -= lr_ * grad;
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m_.size() != values.size()) {
    m_ = Eigen::VectorXd::Zero(values.size());
    v_ = Eigen::VectorXd::Zero(values.size());
  }
  ++t_;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  values.array() -=
      lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

double clip_gradients(std::span<Eigen::VectorXd> grads, double max_norm) {
  double sq = 0.0;
  for (const auto &g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    for (auto &g : grads) g *= max_norm / norm;
  }
  return norm;
}

TrainLog fit(std::span<ParamSet *const> params, Objective &objective,
             const TrainSpec &spec, const EpochCallback &on_epoch) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::vector<Optimizer> opts;
  for (std::size_t i = 0; i < params.size(); ++i) {
    opts.emplace_back(spec.optimizer, spec.lr);
  }
  const int batches = spec.batches_per_epoch > 0
                          ? spec.batches_per_epoch
                          : std::max(1, objective.batches_per_epoch());
  TrainLog log;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    double total = 0.0;
    for (int b = 0; b < batches; ++b) {
      Tape tape;
      std::vector<BoundParams> bound;
      bound.reserve(params.size());
      for (ParamSet *p : params) bound.emplace_back(tape, *p);
      const Var loss = objective.loss(tape, bound, rng);
      if (!std::isfinite(loss.scalar())) {
        throw std::runtime_error("training diverged (non-finite loss)");
      }
      total += loss.scalar();
      tape.backward(loss);
      std::vector<Eigen::VectorXd> grads;
      for (const auto &bp : bound) grads.push_back(bp.gradient());
      clip_gradients(grads, spec.clip_norm);
      for (std::size_t i = 0; i < params.size(); ++i) {
        opts[i].step(params[i]->values(), grads[i]);
      }
      objective.after_step();
    }
    log.epoch_loss.push_back(total / batches);
    if (on_epoch) on_epoch(epoch + 1, log.epoch_loss.back());
  }
  return log;
}

}  // namespace diarkit::nn
