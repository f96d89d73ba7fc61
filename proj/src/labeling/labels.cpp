#include <algorithm>
#include <cmath>

#include "diarkit/labeling.hpp"

namespace diarkit {

FrameLabels vad_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames) {
  FrameLabels out{std::vector<int>(frames, 0), g, 2};
  const Timeline speech = ref.speech();
  std::size_t k = 0;
  for (long i = 0; i < frames; ++i) {
    const double m = g.middle(i);
    while (k < speech.size() && speech[k].end <= m) ++k;
    out.labels[i] = k < speech.size() && speech[k].contains(m) ? 1 : 0;
  }
  return out;
}

std::vector<int> speaker_count(const Annotation &ref,
                               const SlidingWindowGeometry &g, long frames) {
  std::vector<int> count(frames, 0);
  for (const auto &label : ref.labels()) {
    const Timeline tl = ref.label_timeline(label).support();
    std::size_t k = 0;
    for (long i = 0; i < frames; ++i) {
      const double m = g.middle(i);
      while (k < tl.size() && tl[k].end <= m) ++k;
      if (k < tl.size() && tl[k].contains(m)) ++count[i];
    }
  }
  return count;
}

FrameLabels osd_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames) {
  FrameLabels out{speaker_count(ref, g, frames), g, 2};
  for (int &v : out.labels) v = v >= 2 ? 1 : 0;
  return out;
}

std::vector<double> change_points(const Annotation &ref) {
  std::vector<double> bounds;
  for (const auto &t : ref.tracks()) {
    bounds.push_back(t.segment.start);
    bounds.push_back(t.segment.end);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  std::vector<double> out;
  for (double b : bounds) {
    std::set<std::string> before, after;
    for (const auto &t : ref.tracks()) {
      if (t.segment.start < b && b <= t.segment.end) before.insert(t.label);
      if (t.segment.start <= b && b < t.segment.end) after.insert(t.label);
    }
    if (before != after) out.push_back(b);
  }
  return out;
}

FrameLabels scd_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames, const ScdSpec &spec) {
  FrameLabels out{std::vector<int>(frames, 0), g, 2};
  for (double c : change_points(ref)) {
    // Only frames near c can qualify.
    const long lo = std::max(0L, g.closest_frame(c - spec.delta) - 1);
    const long hi = std::min(frames - 1, g.closest_frame(c + spec.delta) + 1);
    for (long i = lo; i <= hi; ++i) {
      if (std::abs(g.middle(i) - c) < spec.delta) out.labels[i] = 1;
    }
  }
  return out;
}

std::string to_string(Task t) {
  switch (t) {
    case Task::vad: return "vad";
    case Task::scd: return "scd";
    case Task::osd: return "osd";
  }
  return "?";
}

Task task_from_string(const std::string &s) {
  if (s == "vad") return Task::vad;
  if (s == "scd") return Task::scd;
  if (s == "osd") return Task::osd;
  throw std::invalid_argument("unknown task '" + s + "'");
}

unsigned long long fnv1a(const std::string &s) {
  unsigned long long h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace diarkit
