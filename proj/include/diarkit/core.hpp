#pragma once

// Temporal data model: segments, timelines, speaker annotations and the
// sliding-window geometry that maps frame indices to time.

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace diarkit {

struct Segment {
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  double middle() const { return 0.5 * (start + end); }
  bool valid() const { return end > start; }
  // Half-open membership [start, end).
  bool contains(double t) const { return t >= start && t < end; }
  bool overlaps(const Segment &o) const {
    return start < o.end && o.start < end;
  }
  Segment intersect(const Segment &o) const {
    return {std::max(start, o.start), std::min(end, o.end)};
  }

  friend bool operator==(const Segment &, const Segment &) = default;
  friend auto operator<=>(const Segment &, const Segment &) = default;
};

// Sorted multiset of valid segments.
class Timeline {
 public:
  Timeline() = default;
  explicit Timeline(std::vector<Segment> segments);

  // Throws std::invalid_argument for zero or negative length segments.
  void add(const Segment &s);

  const std::vector<Segment> &segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  auto begin() const { return segments_.begin(); }
  auto end() const { return segments_.end(); }
  const Segment &operator[](std::size_t i) const { return segments_[i]; }

  // Sum of member durations (overlaps counted twice).
  double duration() const;
  // Smallest segment containing every member. Requires non-empty.
  Segment extent() const;
  // Disjoint, sorted union. Adjacent segments are merged.
  Timeline support() const;
  // Intersection of every member with `focus`, empty pieces dropped.
  Timeline crop(const Segment &focus) const;
  // Parts of `focus` not covered by this timeline.
  Timeline gaps(const Segment &focus) const;
  bool contains(double t) const;

  friend bool operator==(const Timeline &, const Timeline &) = default;

 private:
  std::vector<Segment> segments_;
};

// Interval algebra on the supports of two timelines.
Timeline intersection(const Timeline &a, const Timeline &b);
Timeline difference(const Timeline &a, const Timeline &b);
Timeline union_of(const Timeline &a, const Timeline &b);
double intersection_duration(const Timeline &a, const Timeline &b);

struct Track {
  Segment segment;
  std::string track;
  std::string label;
};

class Annotation {
 public:
  Annotation() = default;
  explicit Annotation(std::string uri) : uri_(std::move(uri)) {}

  const std::string &uri() const { return uri_; }
  void set_uri(std::string uri) { uri_ = std::move(uri); }

  // Adds a track with an automatically chosen, unused track id.
  void add(const Segment &s, const std::string &label);
  // Throws std::invalid_argument on invalid segment or duplicate
  // (segment, track) pair.
  void add(const Segment &s, const std::string &track,
           const std::string &label);

  const std::vector<Track> &tracks() const { return tracks_; }
  bool empty() const { return tracks_.empty(); }
  std::size_t size() const { return tracks_.size(); }

  std::vector<std::string> labels() const;
  Timeline label_timeline(const std::string &label) const;
  double label_duration(const std::string &label) const;
  // Every track segment (not merged).
  Timeline timeline() const;
  Timeline speech() const { return timeline().support(); }
  double total_duration() const;

  Annotation crop(const Segment &focus) const;
  Annotation rename_labels(const std::map<std::string, std::string> &m) const;
  // Labels active at time t (half-open segment membership).
  std::set<std::string> active_at(double t) const;

 private:
  std::string uri_;
  std::vector<Track> tracks_;  // sorted by (segment, track)
};

// Frame i covers [start + i*step, start + i*step + window).
struct SlidingWindowGeometry {
  double start = 0.0;
  double step = 0.01;
  double window = 0.025;

  Segment frame(long i) const {
    const double s = start + static_cast<double>(i) * step;
    return {s, s + window};
  }
  double middle(long i) const {
    return start + static_cast<double>(i) * step + 0.5 * window;
  }
  // Index of the frame whose middle is closest to t.
  long closest_frame(double t) const {
    return std::lround((t - start - 0.5 * window) / step);
  }
  // Frames tile time around their middles: frame i owns
  // [middle(i) - step/2, middle(i) + step/2).
  Segment span(long first, long last_inclusive) const {
    return {middle(first) - 0.5 * step, middle(last_inclusive) + 0.5 * step};
  }
  // Number of frames of a signal lasting `duration` seconds.
  long frames_in(double duration) const {
    if (duration < window) return 0;
    return static_cast<long>(std::floor((duration - window) / step + 1e-9)) + 1;
  }

  friend bool operator==(const SlidingWindowGeometry &,
                         const SlidingWindowGeometry &) = default;
};

}  // namespace diarkit
