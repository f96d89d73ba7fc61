#include <algorithm>
#include <stdexcept>

#include "diarkit/core.hpp"

namespace diarkit {

Timeline::Timeline(std::vector<Segment> segments) {
  for (const auto &s : segments) {
    if (!s.valid()) throw std::invalid_argument("segment with end <= start");
  }
  segments_ = std::move(segments);
  std::sort(segments_.begin(), segments_.end());
}

void Timeline::add(const Segment &s) {
  if (!s.valid()) throw std::invalid_argument("segment with end <= start");
  segments_.insert(std::upper_bound(segments_.begin(), segments_.end(), s),
                   s);
}

double Timeline::duration() const {
  double d = 0.0;
  for (const auto &s : segments_) d += s.duration();
  return d;
}

Segment Timeline::extent() const {
  if (segments_.empty()) throw std::logic_error("extent of empty timeline");
  Segment e = segments_.front();
  for (const auto &s : segments_) e.end = std::max(e.end, s.end);
  return e;
}

Timeline Timeline::support() const {
  Timeline out;
  for (const auto &s : segments_) {
    if (!out.segments_.empty() && s.start <= out.segments_.back().end) {
      out.segments_.back().end = std::max(out.segments_.back().end, s.end);
    } else {
      out.segments_.push_back(s);
    }
  }
  return out;
}

Timeline Timeline::crop(const Segment &focus) const {
  Timeline out;
  for (const auto &s : segments_) {
    const Segment c = s.intersect(focus);
    if (c.valid()) out.segments_.push_back(c);
  }
  std::sort(out.segments_.begin(), out.segments_.end());
  return out;
}

Timeline Timeline::gaps(const Segment &focus) const {
  Timeline out;
  double cursor = focus.start;
  for (const auto &s : support().crop(focus)) {
    if (s.start > cursor) out.segments_.push_back({cursor, s.start});
    cursor = std::max(cursor, s.end);
  }
  if (focus.end > cursor) out.segments_.push_back({cursor, focus.end});
  return out;
}

bool Timeline::contains(double t) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [t](const Segment &s) { return s.contains(t); });
}

Timeline intersection(const Timeline &a, const Timeline &b) {
  const Timeline sa = a.support();
  const Timeline sb = b.support();
  std::vector<Segment> out;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const Segment c = sa[i].intersect(sb[j]);
    if (c.valid()) out.push_back(c);
    if (sa[i].end < sb[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return Timeline(std::move(out));
}

Timeline difference(const Timeline &a, const Timeline &b) {
  const Timeline sa = a.support();
  std::vector<Segment> out;
  for (const auto &s : sa) {
    for (const auto &g : b.gaps(s)) out.push_back(g);
  }
  return Timeline(std::move(out));
}

Timeline union_of(const Timeline &a, const Timeline &b) {
  std::vector<Segment> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  return Timeline(std::move(all)).support();
}

double intersection_duration(const Timeline &a, const Timeline &b) {
  return intersection(a, b).duration();
}

}  // namespace diarkit
