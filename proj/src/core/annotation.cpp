#include <algorithm>
#include <stdexcept>

#include "diarkit/core.hpp"

namespace diarkit {

namespace {

bool track_less(const Track &a, const Track &b) {
  if (a.segment != b.segment) return a.segment < b.segment;
  return a.track < b.track;
}

}  // namespace

void Annotation::add(const Segment &s, const std::string &label) {
  int n = 0;
  for (const auto &t : tracks_) {
    if (t.segment == s) ++n;
  }
  // Find the first integer id not already used on this segment.
  for (;; ++n) {
    const std::string id = std::to_string(n);
    const bool used = std::any_of(tracks_.begin(), tracks_.end(),
                                  [&](const Track &t) {
                                    return t.segment == s && t.track == id;
                                  });
    if (!used) {
      add(s, id, label);
      return;
    }
  }
}

void Annotation::add(const Segment &s, const std::string &track,
                     const std::string &label) {
  if (!s.valid()) throw std::invalid_argument("segment with end <= start");
  Track t{s, track, label};
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), t, track_less);
  if (it != tracks_.end() && it->segment == s && it->track == track) {
    throw std::invalid_argument("duplicate (segment, track) pair");
  }
  tracks_.insert(it, std::move(t));
}

std::vector<std::string> Annotation::labels() const {
  std::set<std::string> s;
  for (const auto &t : tracks_) s.insert(t.label);
  return {s.begin(), s.end()};
}

Timeline Annotation::label_timeline(const std::string &label) const {
  std::vector<Segment> segs;
  for (const auto &t : tracks_) {
    if (t.label == label) segs.push_back(t.segment);
  }
  return Timeline(std::move(segs));
}

double Annotation::label_duration(const std::string &label) const {
  double d = 0.0;
  for (const auto &t : tracks_) {
    if (t.label == label) d += t.segment.duration();
  }
  return d;
}

Timeline Annotation::timeline() const {
  std::vector<Segment> segs;
  segs.reserve(tracks_.size());
  for (const auto &t : tracks_) segs.push_back(t.segment);
  return Timeline(std::move(segs));
}

double Annotation::total_duration() const {
  double d = 0.0;
  for (const auto &t : tracks_) d += t.segment.duration();
  return d;
}

Annotation Annotation::crop(const Segment &focus) const {
  Annotation out(uri_);
  for (const auto &t : tracks_) {
    const Segment c = t.segment.intersect(focus);
    if (c.valid()) out.tracks_.push_back({c, t.track, t.label});
  }
  std::sort(out.tracks_.begin(), out.tracks_.end(), track_less);
  return out;
}

Annotation Annotation::rename_labels(
    const std::map<std::string, std::string> &m) const {
  Annotation out(uri_);
  out.tracks_ = tracks_;
  for (auto &t : out.tracks_) {
    if (auto it = m.find(t.label); it != m.end()) t.label = it->second;
  }
  return out;
}

std::set<std::string> Annotation::active_at(double t) const {
  std::set<std::string> out;
  for (const auto &tr : tracks_) {
    if (tr.segment.start > t) break;
    if (tr.segment.contains(t)) out.insert(tr.label);
  }
  return out;
}

}  // namespace diarkit
