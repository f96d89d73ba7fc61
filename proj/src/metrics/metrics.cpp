#include <algorithm>
#include <cmath>
#include <map>

#include "diarkit/error.hpp"
#include "diarkit/metrics.hpp"

namespace diarkit {

namespace {

double ratio(double num, double den, const char *what) {
  if (den <= 0.0) throw MetricError(std::string(what) + " undefined: zero denominator");
  return num / den;
}

Timeline evaluation_region(const Timeline &ref, const Timeline &hyp,
                           const Timeline &uem) {
  if (!uem.empty()) return uem.support();
  const Timeline both = union_of(ref, hyp);
  if (both.empty()) return {};
  return Timeline({both.extent()});
}

std::vector<Segment> segments_of(const Annotation &a) {
  std::vector<Segment> out;
  for (const auto &t : a.tracks()) out.push_back(t.segment);
  return out;
}

PurityCoverage purity_coverage_segments(const std::vector<Segment> &ref,
                                        const std::vector<Segment> &hyp,
                                        const Timeline &region) {
  auto scored = [&](const Segment &a, const Segment &b) {
    const Segment c = a.intersect(b);
    return c.valid() ? intersection_duration(Timeline({c}), region) : 0.0;
  };
  PurityCoverage pc;
  for (const auto &h : hyp) {
    pc.purity_den += intersection_duration(Timeline({h}), region);
    double best = 0.0;
    for (const auto &r : ref) best = std::max(best, scored(h, r));
    pc.purity_num += best;
  }
  for (const auto &r : ref) {
    pc.coverage_den += intersection_duration(Timeline({r}), region);
    double best = 0.0;
    for (const auto &h : hyp) best = std::max(best, scored(r, h));
    pc.coverage_num += best;
  }
  return pc;
}

}  // namespace

double DetectionError::rate() const {
  return ratio(false_alarm + miss, total, "detection error rate");
}
double DetectionError::fa_rate() const {
  return ratio(false_alarm, total, "false alarm rate");
}
double DetectionError::miss_rate() const {
  return ratio(miss, total, "miss rate");
}
DetectionError &DetectionError::operator+=(const DetectionError &o) {
  false_alarm += o.false_alarm;
  miss += o.miss;
  total += o.total;
  return *this;
}

DetectionError detection_error(const Annotation &ref, const Timeline &hyp,
                               const Timeline &uem) {
  const Timeline region = evaluation_region(ref.timeline(), hyp, uem);
  const Timeline speech = intersection(ref.speech(), region);
  const Timeline detected = intersection(hyp, region);
  DetectionError e;
  e.total = speech.duration();
  e.miss = difference(speech, detected).duration();
  e.false_alarm = difference(detected, speech).duration();
  return e;
}

double PurityCoverage::purity() const {
  return ratio(purity_num, purity_den, "purity");
}
double PurityCoverage::coverage() const {
  return ratio(coverage_num, coverage_den, "coverage");
}
double PurityCoverage::f_measure() const {
  const double p = purity(), c = coverage();
  return p + c > 0.0 ? 2.0 * p * c / (p + c) : 0.0;
}
PurityCoverage &PurityCoverage::operator+=(const PurityCoverage &o) {
  purity_num += o.purity_num;
  purity_den += o.purity_den;
  coverage_num += o.coverage_num;
  coverage_den += o.coverage_den;
  return *this;
}

PurityCoverage purity_coverage(const Annotation &ref, const Annotation &hyp,
                               const Timeline &uem) {
  const Timeline region =
      evaluation_region(ref.timeline(), hyp.timeline(), uem);
  return purity_coverage_segments(segments_of(ref), segments_of(hyp), region);
}

PurityCoverage purity_coverage(const Timeline &ref, const Timeline &hyp,
                               const Timeline &uem) {
  const Timeline region = evaluation_region(ref, hyp, uem);
  return purity_coverage_segments(ref.segments(), hyp.segments(), region);
}

double PrecisionRecall::precision() const {
  return ratio(true_positive, hyp_positive, "precision");
}
double PrecisionRecall::recall() const {
  return ratio(true_positive, ref_positive, "recall");
}
PrecisionRecall &PrecisionRecall::operator+=(const PrecisionRecall &o) {
  true_positive += o.true_positive;
  ref_positive += o.ref_positive;
  hyp_positive += o.hyp_positive;
  return *this;
}

PrecisionRecall precision_recall(std::span<const int> ref,
                                 std::span<const int> hyp,
                                 std::span<const int> mask) {
  if (ref.size() != hyp.size() || (!mask.empty() && mask.size() != ref.size())) {
    throw std::invalid_argument("precision_recall: length mismatch");
  }
  PrecisionRecall pr;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    const bool r = ref[i] == 1, h = hyp[i] == 1;
    pr.ref_positive += r;
    pr.hyp_positive += h;
    pr.true_positive += r && h;
  }
  return pr;
}

PrecisionRecall precision_recall(const Timeline &ref, const Timeline &hyp,
                                 const Timeline &uem) {
  const Timeline region = evaluation_region(ref, hyp, uem);
  const Timeline r = intersection(ref, region);
  const Timeline h = intersection(hyp, region);
  PrecisionRecall pr;
  pr.ref_positive = r.duration();
  pr.hyp_positive = h.duration();
  pr.true_positive = intersection_duration(r, h);
  return pr;
}

double DiarizationError::rate() const {
  return ratio(false_alarm + miss + confusion, total, "diarization error rate");
}
DiarizationError &DiarizationError::operator+=(const DiarizationError &o) {
  false_alarm += o.false_alarm;
  miss += o.miss;
  confusion += o.confusion;
  total += o.total;
  return *this;
}

Timeline scoring_region(const Annotation &ref, const Annotation &hyp,
                        const Timeline &uem, double collar) {
  Timeline region = evaluation_region(ref.timeline(), hyp.timeline(), uem);
  if (collar <= 0.0) return region;
  std::vector<Segment> zones;
  for (const auto &t : ref.tracks()) {
    for (double b : {t.segment.start, t.segment.end}) {
      zones.push_back({b - 0.5 * collar, b + 0.5 * collar});
    }
  }
  return difference(region, Timeline(std::move(zones)));
}

DiarizationError der(const Annotation &ref, const Annotation &hyp,
                     const Timeline &uem, double collar) {
  const Timeline region = scoring_region(ref, hyp, uem, collar);
  const std::vector<std::string> ref_labels = ref.labels();
  const std::vector<std::string> hyp_labels = hyp.labels();
  std::vector<Timeline> ref_tl, hyp_tl;
  for (const auto &l : ref_labels) ref_tl.push_back(ref.label_timeline(l).support());
  for (const auto &l : hyp_labels) hyp_tl.push_back(hyp.label_timeline(l).support());

  std::vector<double> bounds;
  for (const auto &t : ref.tracks()) {
    bounds.push_back(t.segment.start);
    bounds.push_back(t.segment.end);
  }
  for (const auto &t : hyp.tracks()) {
    bounds.push_back(t.segment.start);
    bounds.push_back(t.segment.end);
  }
  for (const auto &s : region) {
    bounds.push_back(s.start);
    bounds.push_back(s.end);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  struct Piece {
    double duration;
    std::vector<int> r, h;
  };
  std::vector<Piece> pieces;
  Eigen::MatrixXd overlap =
      Eigen::MatrixXd::Zero(ref_labels.size(), hyp_labels.size());
  DiarizationError e;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const double a = bounds[k], b = bounds[k + 1];
    const double m = 0.5 * (a + b);
    if (!region.contains(m)) continue;
    Piece p{b - a, {}, {}};
    for (std::size_t i = 0; i < ref_tl.size(); ++i) {
      if (ref_tl[i].contains(m)) p.r.push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < hyp_tl.size(); ++j) {
      if (hyp_tl[j].contains(m)) p.h.push_back(static_cast<int>(j));
    }
    if (p.r.empty() && p.h.empty()) continue;
    for (int i : p.r) {
      for (int j : p.h) overlap(i, j) += p.duration;
    }
    pieces.push_back(std::move(p));
  }

  const std::vector<int> mapping = max_weight_assignment(overlap);
  for (const auto &p : pieces) {
    const double nr = static_cast<double>(p.r.size());
    const double nh = static_cast<double>(p.h.size());
    double correct = 0.0;
    for (int i : p.r) {
      if (mapping[i] >= 0 &&
          std::find(p.h.begin(), p.h.end(), mapping[i]) != p.h.end()) {
        correct += 1.0;
      }
    }
    e.total += p.duration * nr;
    e.miss += p.duration * std::max(0.0, nr - nh);
    e.false_alarm += p.duration * std::max(0.0, nh - nr);
    e.confusion += p.duration * (std::min(nr, nh) - correct);
  }
  return e;
}

double eer(std::span<const double> target, std::span<const double> nontarget) {
  if (target.empty() || nontarget.empty()) {
    throw MetricError("EER needs at least one target and one non-target score");
  }
  // Operating points while lowering the acceptance threshold through every
  // distinct score; tied scores move together.
  std::map<double, std::pair<long, long>, std::greater<>> counts;
  for (double s : target) ++counts[s].first;
  for (double s : nontarget) ++counts[s].second;
  const double nt = static_cast<double>(target.size());
  const double nn = static_cast<double>(nontarget.size());
  std::vector<std::pair<double, double>> roc{{0.0, 1.0}};  // (pfa, pmiss)
  long tp = 0, fp = 0;
  for (const auto &[score, c] : counts) {
    tp += c.first;
    fp += c.second;
    roc.push_back({fp / nn, 1.0 - tp / nt});
  }

  // Lower convex hull; pfa is non-decreasing and pmiss non-increasing.
  std::vector<std::pair<double, double>> hull;
  for (const auto &p : roc) {
    while (hull.size() >= 2) {
      const auto &a = hull[hull.size() - 2];
      const auto &b = hull.back();
      const double cross = (b.first - a.first) * (p.second - a.second) -
                           (b.second - a.second) * (p.first - a.first);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }

  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    const double d0 = hull[i].second - hull[i].first;
    const double d1 = hull[i + 1].second - hull[i + 1].first;
    if (d0 >= 0.0 && d1 <= 0.0) {
      if (d0 == d1) return hull[i].first;
      const double t = d0 / (d0 - d1);
      return hull[i].first + t * (hull[i + 1].first - hull[i].first);
    }
  }
  return 0.0;
}

}  // namespace diarkit
