#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "diarkit/error.hpp"
#include "diarkit/features.hpp"

namespace diarkit {

namespace {

std::uint32_t le32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t le16(const unsigned char *p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

void put32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put16(std::string &out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

}  // namespace

Waveform Waveform::slice(long first, long n) const {
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<std::size_t>(std::max(0L, n)), 0.0);
  for (long i = 0; i < n; ++i) {
    const long k = first + i;
    if (k >= 0 && k < size()) out.samples[i] = samples[k];
  }
  return out;
}

Waveform read_wav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  int channels = 0, bits = 0, sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw FormatError(name + ": truncated fmt chunk");
      }
      const int format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      bits = le16(bytes.data() + body + 14);
      if (format != 1) {
        throw FormatError(name + ": unsupported format (only PCM)");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(name + ": data chunk before fmt");
      if (channels != 1) {
        throw FormatError(name + ": unsupported format (" +
                          std::to_string(channels) + " channels, need mono)");
      }
      if (bits != 16) {
        throw FormatError(name + ": unsupported format (" +
                          std::to_string(bits) + "-bit, need 16-bit)");
      }
      if (sample_rate <= 0) throw FormatError(name + ": bad sample rate");
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      Waveform w;
      w.sample_rate = sample_rate;
      w.samples.resize(avail / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(name + ": no data chunk");
}

void write_wav(const std::filesystem::path &path, const Waveform &w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const long q = std::clamp(std::lround(c * 32768.0), -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

double rms(const std::vector<double> &x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

SlidingWindowFeature SlidingWindowFeature::slice(long first, long n) const {
  SlidingWindowFeature out;
  out.data = data.middleRows(first, n);
  out.geometry = geometry;
  out.geometry.start = geometry.start + static_cast<double>(first) * geometry.step;
  return out;
}

}  // namespace diarkit
