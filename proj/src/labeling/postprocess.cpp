#include <algorithm>
#include <numeric>

#include "diarkit/labeling.hpp"

namespace diarkit {

Timeline binarize(std::span<const double> scores,
                  const SlidingWindowGeometry &g, const BinarizeParams &p) {
  struct Run {
    long first, last;
  };
  std::vector<Run> runs;
  const long n = static_cast<long>(scores.size());
  for (long i = 0; i < n; ++i) {
    if (!(scores[i] > p.threshold)) continue;
    if (!runs.empty() && runs.back().last == i - 1) {
      runs.back().last = i;
    } else {
      runs.push_back({i, i});
    }
  }

  std::vector<Run> filled;
  for (const auto &r : runs) {
    if (!filled.empty()) {
      const long gap = r.first - filled.back().last - 1;
      if (static_cast<double>(gap) * g.step < p.min_duration_off) {
        filled.back().last = r.last;
        continue;
      }
    }
    filled.push_back(r);
  }

  std::vector<Segment> segs;
  for (const auto &r : filled) {
    const double dur = static_cast<double>(r.last - r.first + 1) * g.step;
    if (dur < p.min_duration_on) continue;
    segs.push_back(g.span(r.first, r.last));
  }
  return Timeline(std::move(segs));
}

std::vector<double> column(const SlidingWindowFeature &scores, int c) {
  std::vector<double> out(scores.frames());
  for (long i = 0; i < scores.frames(); ++i) out[i] = scores.data(i, c);
  return out;
}

Timeline binarize(const SlidingWindowFeature &scores, int c,
                  const BinarizeParams &p) {
  return binarize(column(scores, c), scores.geometry, p);
}

std::vector<long> peak_frames(std::span<const double> scores,
                              const SlidingWindowGeometry &g,
                              const PeakParams &p) {
  const long n = static_cast<long>(scores.size());
  std::vector<long> candidates;
  for (long i = 1; i + 1 < n; ++i) {
    if (scores[i] > p.threshold && scores[i] > scores[i - 1] &&
        scores[i] > scores[i + 1]) {
      candidates.push_back(i);
    }
  }
  if (p.min_gap <= 0.0) return candidates;

  std::vector<long> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
    return scores[a] > scores[b];
  });
  std::vector<long> kept;
  for (long c : order) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](long k) {
      return static_cast<double>(std::abs(c - k)) * g.step >= p.min_gap - 1e-9;
    });
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<double> peak_pick(std::span<const double> scores,
                              const SlidingWindowGeometry &g,
                              const PeakParams &p) {
  std::vector<double> out;
  for (long i : peak_frames(scores, g, p)) out.push_back(g.middle(i));
  return out;
}

Timeline split_at(const Timeline &regions, std::span<const double> times) {
  std::vector<double> sorted(times.begin(), times.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Segment> out;
  for (const auto &r : regions.support()) {
    double cursor = r.start;
    auto it = std::upper_bound(sorted.begin(), sorted.end(), r.start);
    for (; it != sorted.end() && *it < r.end; ++it) {
      if (*it > cursor) {
        out.push_back({cursor, *it});
        cursor = *it;
      }
    }
    out.push_back({cursor, r.end});
  }
  return Timeline(std::move(out));
}

}  // namespace diarkit
