#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "diarkit/corpus.hpp"
#include "diarkit/error.hpp"
#include "diarkit/rttm.hpp"

namespace diarkit {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<FileEntry> &ProtocolSpec::split(const std::string &s) const {
  auto it = splits.find(s);
  if (it == splits.end() || it->second.empty()) {
    throw ValidationError("protocol '" + name + "' has no files in split '" +
                          s + "'");
  }
  return it->second;
}

void ProtocolSpec::validate() const {
  std::map<std::string, std::string> owner;
  for (const auto &[split_name, files] : splits) {
    for (const auto &f : files) {
      auto [it, fresh] = owner.emplace(f.uri, split_name);
      if (!fresh) {
        throw ValidationError("uri '" + f.uri + "' appears in splits '" +
                              it->second + "' and '" + split_name + "'");
      }
      for (const fs::path *p : {&f.wav, &f.rttm, &f.uem}) {
        if (p == &f.uem && p->empty()) continue;
        if (p->empty()) {
          throw ValidationError("uri '" + f.uri + "': missing path");
        }
        if (!fs::exists(*p)) {
          throw ValidationError("uri '" + f.uri + "': file not found: " +
                                p->string());
        }
      }
    }
  }
  if (!noise_dir.empty() && !fs::is_directory(noise_dir)) {
    throw ValidationError("noise directory not found: " + noise_dir.string());
  }
}

ProtocolSpec load_protocol(const fs::path &config) {
  std::ifstream in(config);
  if (!in) throw ValidationError("cannot open protocol " + config.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ValidationError(config.string() + ": " + e.what());
  }
  const fs::path base = config.parent_path();
  auto resolve = [&](const std::string &p) -> fs::path {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  ProtocolSpec p;
  try {
    p.name = j.value("name", config.stem().string());
    p.noise_dir = resolve(j.value("noise_dir", ""));
    for (const auto &[split_name, files] : j.at("splits").items()) {
      auto &list = p.splits[split_name];
      for (const auto &f : files) {
        list.push_back({f.at("uri").get<std::string>(),
                        resolve(f.at("wav").get<std::string>()),
                        resolve(f.at("rttm").get<std::string>()),
                        resolve(f.value("uem", ""))});
      }
    }
  } catch (const json::exception &e) {
    throw ValidationError(config.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

void save_protocol(const fs::path &config, const ProtocolSpec &p) {
  const fs::path base = config.parent_path();
  auto rel = [&](const fs::path &path) {
    return path.empty() ? std::string() : path.lexically_relative(base).string();
  };
  json j;
  j["name"] = p.name;
  if (!p.noise_dir.empty()) j["noise_dir"] = rel(p.noise_dir);
  j["splits"] = json::object();
  for (const auto &[split_name, files] : p.splits) {
    json list = json::array();
    for (const auto &f : files) {
      json e = {{"uri", f.uri}, {"wav", rel(f.wav)}, {"rttm", rel(f.rttm)}};
      if (!f.uem.empty()) e["uem"] = rel(f.uem);
      list.push_back(e);
    }
    j["splits"][split_name] = list;
  }
  std::ofstream out(config);
  if (!out) throw Error("cannot write " + config.string());
  out << j.dump(2) << "\n";
}

CorpusFile load_file(const FileEntry &entry) {
  CorpusFile f;
  f.uri = entry.uri;
  f.wav_path = entry.wav;
  f.waveform = read_wav(entry.wav);
  const AnnotationMap refs = read_rttm(entry.rttm);
  auto it = refs.find(entry.uri);
  f.reference = it != refs.end() ? it->second : Annotation(entry.uri);
  if (entry.uem.empty()) {
    f.uem = Timeline({{0.0, f.waveform.duration()}});
  } else {
    const TimelineMap uems = read_uem(entry.uem);
    auto u = uems.find(entry.uri);
    if (u == uems.end()) {
      throw ValidationError(entry.uem.string() + ": no region for uri '" +
                            entry.uri + "'");
    }
    f.uem = u->second;
  }
  return f;
}

std::vector<CorpusFile> load_split(const ProtocolSpec &p, const std::string &s) {
  std::vector<CorpusFile> out;
  for (const auto &e : p.split(s)) out.push_back(load_file(e));
  return out;
}

}  // namespace diarkit
