#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>

#include "diarkit/core.hpp"

namespace diarkit {

using AnnotationMap = std::map<std::string, Annotation>;
using TimelineMap = std::map<std::string, Timeline>;

// RTTM: SPEAKER <uri> <chan> <start> <dur> <NA> <NA> <label> <NA> <NA>
// Blank lines and lines starting with ';' or '#' are ignored, as are
// record types other than SPEAKER. Throws ParseError naming the line.
AnnotationMap parse_rttm(std::istream &in, const std::string &source = "rttm");
AnnotationMap read_rttm(const std::filesystem::path &path);

// Times printed with 3 decimals, tracks in (uri, segment, track) order.
std::string format_rttm(const Annotation &a);
std::string format_rttm(const AnnotationMap &m);
void write_rttm(const std::filesystem::path &path, const AnnotationMap &m);

// UEM: <uri> <chan> <start> <end>. Regions of one uri are support-merged.
TimelineMap parse_uem(std::istream &in, const std::string &source = "uem");
TimelineMap read_uem(const std::filesystem::path &path);
std::string format_uem(const TimelineMap &m);
void write_uem(const std::filesystem::path &path, const TimelineMap &m);

}  // namespace diarkit
