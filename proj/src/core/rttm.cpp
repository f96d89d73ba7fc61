#include "diarkit/rttm.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "diarkit/error.hpp"

namespace diarkit {

namespace {

std::vector<std::string> split_ws(const std::string &line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string &tok, const std::string &source,
                    int line) {
  double v = 0.0;
  const char *first = tok.data();
  const char *last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(source, line, "not a number: '" + tok + "'");
  }
  return v;
}

bool skippable(const std::vector<std::string> &f) {
  return f.empty() || f[0][0] == '#' || f[0][0] == ';';
}

std::ifstream open_or_throw(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

AnnotationMap parse_rttm(std::istream &in, const std::string &source) {
  AnnotationMap out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_ws(line);
    if (skippable(f)) continue;
    if (f.size() < 9 || f.size() > 10) {
      throw ParseError(source, lineno,
                       "expected 9 or 10 fields, got " +
                           std::to_string(f.size()));
    }
    if (f[0] != "SPEAKER") continue;
    const double start = parse_double(f[3], source, lineno);
    const double dur = parse_double(f[4], source, lineno);
    if (dur < 0.0) throw ParseError(source, lineno, "negative duration");
    auto &a = out.try_emplace(f[1], f[1]).first->second;
    // Zero-length tracks carry no time and are dropped.
    if (dur == 0.0) continue;
    a.add({start, start + dur}, f[7]);
  }
  return out;
}

AnnotationMap read_rttm(const std::filesystem::path &path) {
  auto in = open_or_throw(path);
  return parse_rttm(in, path.string());
}

std::string format_rttm(const Annotation &a) {
  std::string out;
  for (const auto &t : a.tracks()) {
    out += "SPEAKER " + a.uri() + " 1 " + fixed3(t.segment.start) + " " +
           fixed3(t.segment.duration()) + " <NA> <NA> " + t.label +
           " <NA> <NA>\n";
  }
  return out;
}

std::string format_rttm(const AnnotationMap &m) {
  std::string out;
  for (const auto &[uri, a] : m) out += format_rttm(a);
  return out;
}

void write_rttm(const std::filesystem::path &path, const AnnotationMap &m) {
  write_text(path, format_rttm(m));
}

TimelineMap parse_uem(std::istream &in, const std::string &source) {
  std::map<std::string, std::vector<Segment>> regions;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_ws(line);
    if (skippable(f)) continue;
    if (f.size() != 4) {
      throw ParseError(source, lineno,
                       "expected 4 fields, got " + std::to_string(f.size()));
    }
    const double start = parse_double(f[2], source, lineno);
    const double end = parse_double(f[3], source, lineno);
    if (end <= start) throw ParseError(source, lineno, "end <= start");
    regions[f[0]].push_back({start, end});
  }
  TimelineMap out;
  for (auto &[uri, segs] : regions) {
    out.emplace(uri, Timeline(std::move(segs)).support());
  }
  return out;
}

TimelineMap read_uem(const std::filesystem::path &path) {
  auto in = open_or_throw(path);
  return parse_uem(in, path.string());
}

std::string format_uem(const TimelineMap &m) {
  std::string out;
  for (const auto &[uri, tl] : m) {
    for (const auto &s : tl) {
      out += uri + " 1 " + fixed3(s.start) + " " + fixed3(s.end) + "\n";
    }
  }
  return out;
}

void write_uem(const std::filesystem::path &path, const TimelineMap &m) {
  write_text(path, format_uem(m));
}

}  // namespace diarkit
