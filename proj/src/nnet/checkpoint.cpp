#include <cstdint>
#include <cstring>
#include <fstream>

#include "diarkit/config.hpp"
#include "diarkit/error.hpp"
#include "diarkit/nnet.hpp"

namespace diarkit::nn {

namespace {

constexpr char kModelMagic[] = "DKMODEL1";
constexpr char kScoreMagic[] = "DKSCORE1";

void put_le(std::string &out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string &in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

void write_blob(const std::filesystem::path &path, const char *magic,
                const std::string &header, const double *values,
                std::size_t count) {
  std::string out(magic, 8);
  put_le(out, header.size(), 4);
  out += header;
  put_le(out, count, 8);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = static_cast<float>(values[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_le(out, bits, 4);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

struct Blob {
  std::string header;
  std::vector<double> values;
};

Blob read_blob(const std::filesystem::path &path, const char *magic) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open " + path.string());
  const std::string in((std::istreambuf_iterator<char>(file)),
                       std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (in.size() < 12 || in.compare(0, 8, magic) != 0) {
    throw FormatError(name + ": bad magic (expected " + magic + ")");
  }
  const std::size_t hlen = get_le(in, 8, 4);
  if (in.size() < 12 + hlen + 8) throw FormatError(name + ": truncated");
  Blob b;
  b.header = in.substr(12, hlen);
  const std::size_t count = get_le(in, 12 + hlen, 8);
  const std::size_t base = 20 + hlen;
  if (in.size() != base + 4 * count) {
    throw FormatError(name + ": value count does not match file size");
  }
  b.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = static_cast<std::uint32_t>(get_le(in, base + 4 * i, 4));
    float f;
    std::memcpy(&f, &bits, 4);
    b.values[i] = f;
  }
  return b;
}

}  // namespace

void save_checkpoint(const std::filesystem::path &path, const SequenceModel &m,
                     const std::string &metadata_json) {
  json header = {{"arch", diarkit::to_json(m.arch())},
                 {"metadata", json::parse(metadata_json)}};
  write_blob(path, kModelMagic, header.dump(), m.params().values().data(),
             static_cast<std::size_t>(m.params().size()));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  Blob b = read_blob(path, kModelMagic);
  json header;
  try {
    header = json::parse(b.header);
  } catch (const json::exception &e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  Checkpoint c;
  try {
    c.model = SequenceModel(diarkit::arch_from_json(header.at("arch")), 0);
  } catch (const std::exception &e) {
    throw FormatError(path.string() + ": bad arch: " + e.what());
  }
  if (static_cast<long>(b.values.size()) != c.model.params().size()) {
    throw FormatError(path.string() + ": parameter count does not match arch");
  }
  c.model.params().values() =
      Eigen::Map<const Eigen::VectorXd>(b.values.data(), b.values.size());
  c.metadata_json = header.value("metadata", json::object()).dump();
  return c;
}

void save_scores(const std::filesystem::path &path,
                 const SlidingWindowFeature &scores, const std::string &uri) {
  json header = {{"uri", uri},
                 {"start", scores.geometry.start},
                 {"step", scores.geometry.step},
                 {"window", scores.geometry.window},
                 {"rows", scores.data.rows()},
                 {"cols", scores.data.cols()}};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      row_major = scores.data;
  write_blob(path, kScoreMagic, header.dump(), row_major.data(),
             static_cast<std::size_t>(row_major.size()));
}

SlidingWindowFeature load_scores(const std::filesystem::path &path,
                                 std::string *uri) {
  Blob b = read_blob(path, kScoreMagic);
  const json header = json::parse(b.header);
  SlidingWindowFeature s;
  s.geometry = {header.at("start").get<double>(), header.at("step").get<double>(),
                header.at("window").get<double>()};
  const long r = header.at("rows").get<long>();
  const long c = header.at("cols").get<long>();
  if (static_cast<long>(b.values.size()) != r * c) {
    throw FormatError(path.string() + ": score matrix size mismatch");
  }
  s.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(b.values.data(), r, c);
  if (uri) *uri = header.value("uri", "");
  return s;
}

void round_to_float(SequenceModel &m) {
  for (double &v : m.params().values()) v = static_cast<float>(v);
}

}  // namespace diarkit::nn
