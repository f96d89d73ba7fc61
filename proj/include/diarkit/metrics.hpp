#pragma once

// Evaluation metrics. All durations are computed on intervals; an empty
// `uem` means the extent of the reference and hypothesis together. Rate
// accessors throw MetricError when the denominator is zero.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "diarkit/core.hpp"

namespace diarkit {

struct DetectionError {
  double false_alarm = 0.0;
  double miss = 0.0;
  double total = 0.0;  // reference speech

  double rate() const;
  double fa_rate() const;
  double miss_rate() const;
  DetectionError &operator+=(const DetectionError &o);
};

DetectionError detection_error(const Annotation &ref, const Timeline &hyp,
                               const Timeline &uem = {});

// Segments are taken as emitted, without merging.
//   purity   = sum_h max_r |h & r| / sum_h |h|
//   coverage = sum_r max_h |r & h| / sum_r |r|
struct PurityCoverage {
  double purity_num = 0.0, purity_den = 0.0;
  double coverage_num = 0.0, coverage_den = 0.0;

  double purity() const;
  double coverage() const;
  // Harmonic mean of purity and coverage.
  double f_measure() const;
  PurityCoverage &operator+=(const PurityCoverage &o);
};

PurityCoverage purity_coverage(const Annotation &ref, const Annotation &hyp,
                               const Timeline &uem = {});
PurityCoverage purity_coverage(const Timeline &ref, const Timeline &hyp,
                               const Timeline &uem = {});

struct PrecisionRecall {
  double true_positive = 0.0;
  double ref_positive = 0.0;
  double hyp_positive = 0.0;

  // Undefined (MetricError) when the hypothesis has no positive.
  double precision() const;
  bool has_precision() const { return hyp_positive > 0.0; }
  double recall() const;
  PrecisionRecall &operator+=(const PrecisionRecall &o);
};

// Frame counts of the positive class (label 1). `mask`, when given, selects
// the frames that are scored.
PrecisionRecall precision_recall(std::span<const int> ref,
                                 std::span<const int> hyp,
                                 std::span<const int> mask = {});
// Durations of positive regions.
PrecisionRecall precision_recall(const Timeline &ref, const Timeline &hyp,
                                 const Timeline &uem = {});

struct DiarizationError {
  double false_alarm = 0.0;
  double miss = 0.0;
  double confusion = 0.0;
  double total = 0.0;  // reference speech, overlaps counted once per speaker

  double rate() const;
  DiarizationError &operator+=(const DiarizationError &o);
};

// Optimal one-to-one label mapping maximising the matched duration. A
// collar removes [b - collar/2, b + collar/2] around every reference
// boundary b from scoring.
DiarizationError der(const Annotation &ref, const Annotation &hyp,
                     const Timeline &uem = {}, double collar = 0.0);

// Scoring region used by der(): uem (or default extent) minus the collars.
Timeline scoring_region(const Annotation &ref, const Annotation &hyp,
                        const Timeline &uem, double collar);

// Row -> column assignment maximising the total weight (-1 for unassigned
// rows). Exact up to 64 x 64, greedy with a warning beyond.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd &w);

// Equal error rate on the ROC convex hull, interpolating linearly between
// adjacent hull vertices. Higher scores mean "same speaker".
double eer(std::span<const double> target, std::span<const double> nontarget);

}  // namespace diarkit
