#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "diarkit/embedding.hpp"

namespace diarkit {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::triplet: return "triplet";
    case LossKind::contrastive: return "contrastive";
    case LossKind::center: return "center";
    case LossKind::angular: return "additive-angular-margin";
    case LossKind::congenerous: return "congenerous-cosine";
  }
  return "?";
}

LossKind loss_from_string(const std::string &s) {
  for (LossKind k : {LossKind::triplet, LossKind::contrastive, LossKind::center,
                     LossKind::angular, LossKind::congenerous}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown loss '" + s + "'");
}

void LossSpec::validate() const {
  if (!(margin >= 0.0)) throw std::invalid_argument("loss: margin must be >= 0");
  if (!(scale > 0.0)) throw std::invalid_argument("loss: scale must be > 0");
  if (!(center_weight >= 0.0)) throw std::invalid_argument("loss: lambda < 0");
  if (!(center_momentum >= 0.0 && center_momentum <= 1.0)) {
    throw std::invalid_argument("loss: center momentum outside [0, 1]");
  }
}

nn::Var cosine_distance_matrix(const nn::Var &e) {
  nn::Tape &t = *e.tape();
  const nn::Var ones = t.constant(nn::Matrix::Ones(e.rows(), e.rows()));
  return nn::sub(ones, nn::matmul(e, nn::transpose(e)));
}

EmbeddingLoss::EmbeddingLoss(LossSpec spec, int dim, int classes,
                             unsigned long long seed)
    : spec_(spec), classes_(classes) {
  spec_.validate();
  if (spec_.kind == LossKind::center || spec_.kind == LossKind::angular) {
    if (classes < 1) throw std::invalid_argument("loss needs >= 1 class");
    params_.add("head.W", dim, classes);
    std::mt19937_64 rng(seed);
    const double a = std::sqrt(6.0 / (dim + classes));
    std::uniform_real_distribution<double> u(-a, a);
    for (double &v : params_.values()) v = u(rng);
  }
  if (spec_.kind == LossKind::center) {
    centers_ = nn::Matrix::Zero(classes, dim);
    seen_.assign(classes, false);
  }
}

void EmbeddingLoss::set_centers(nn::Matrix c) {
  centers_ = std::move(c);
  seen_.assign(centers_.rows(), true);
}

nn::Var EmbeddingLoss::operator()(nn::Tape &tape, const nn::Var &e,
                                  std::span<const int> labels,
                                  const nn::BoundParams *head) const {
  const long n = e.rows();
  if (static_cast<long>(labels.size()) != n) {
    throw std::invalid_argument("loss: one label per embedding");
  }
  const std::set<int> distinct(labels.begin(), labels.end());
  if (has_params() && head == nullptr) {
    throw std::invalid_argument("loss: classifier parameters not bound");
  }

  switch (spec_.kind) {
    case LossKind::triplet:
      if (distinct.size() < 2) {
        throw std::invalid_argument("triplet loss needs >= 2 speakers per batch");
      }
      return nn::triplet_hinge(cosine_distance_matrix(e), labels, spec_.margin);

    case LossKind::contrastive:
      if (distinct.size() < 2) {
        throw std::invalid_argument(
            "contrastive loss needs >= 2 speakers per batch");
      }
      return nn::contrastive_pairs(cosine_distance_matrix(e), labels,
                                   spec_.margin);

    case LossKind::center: {
      const nn::Var ce = nn::softmax_cross_entropy(
          nn::matmul(e, (*head)["head.W"]), labels);
      nn::Matrix c(n, e.cols());
      for (long i = 0; i < n; ++i) c.row(i) = centers_.row(labels[i]);
      const nn::Var pull = nn::scale(
          nn::mean(nn::square(nn::sub(e, tape.constant(std::move(c))))),
          static_cast<double>(e.cols()));
      return nn::add(ce, nn::scale(pull, spec_.center_weight));
    }

    case LossKind::angular: {
      const nn::Var w = nn::l2_normalize_rows(nn::transpose((*head)["head.W"]));
      const nn::Var cosines = nn::matmul(e, nn::transpose(w));
      return nn::softmax_cross_entropy(
          nn::angular_margin_logits(cosines, labels, spec_.margin, spec_.scale),
          labels);
    }

    case LossKind::congenerous: {
      const std::vector<int> classes(distinct.begin(), distinct.end());
      const long k = static_cast<long>(classes.size());
      nn::Matrix avg = nn::Matrix::Zero(k, n);
      std::vector<int> target(n);
      for (long i = 0; i < n; ++i) {
        target[i] = static_cast<int>(
            std::lower_bound(classes.begin(), classes.end(), labels[i]) -
            classes.begin());
        avg(target[i], i) = 1.0;
      }
      for (long r = 0; r < k; ++r) avg.row(r) /= avg.row(r).sum();
      const nn::Var centroids =
          nn::l2_normalize_rows(nn::matmul(tape.constant(std::move(avg)), e));
      const nn::Var logits =
          nn::scale(nn::matmul(e, nn::transpose(centroids)), spec_.scale);
      return nn::softmax_cross_entropy(logits, target);
    }
  }
  throw std::logic_error("unreachable");
}

void EmbeddingLoss::update_centers(const nn::Matrix &e,
                                   std::span<const int> labels) {
  if (spec_.kind != LossKind::center) return;
  for (int c = 0; c < classes_; ++c) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(e.cols());
    long count = 0;
    for (long i = 0; i < e.rows(); ++i) {
      if (labels[i] == c) {
        m += e.row(i);
        ++count;
      }
    }
    if (count == 0) continue;
    m /= static_cast<double>(count);
    if (!seen_[c]) {
      centers_.row(c) = m;
      seen_[c] = true;
    } else {
      centers_.row(c) = spec_.center_momentum * centers_.row(c) +
                        (1.0 - spec_.center_momentum) * m;
    }
  }
}

}  // namespace diarkit
