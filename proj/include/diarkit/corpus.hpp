#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diarkit/core.hpp"
#include "diarkit/features.hpp"

namespace diarkit {

struct FileEntry {
  std::string uri;
  std::filesystem::path wav;
  std::filesystem::path rttm;
  std::filesystem::path uem;  // empty: the whole file is evaluated
};

// Named corpus with train/dev/eval file lists.
struct ProtocolSpec {
  std::string name;
  std::map<std::string, std::vector<FileEntry>> splits;
  std::filesystem::path noise_dir;  // optional

  // Throws ValidationError for an unknown or empty split.
  const std::vector<FileEntry> &split(const std::string &name) const;
  // Disjoint uris across splits and every listed file present; throws
  // ValidationError naming the offending uri or file.
  void validate() const;
};

// JSON:
//   {"name": ..., "noise_dir": ...,
//    "splits": {"train": [{"uri", "wav", "rttm", "uem"}, ...], ...}}
// Relative paths are resolved against the directory of the config file.
ProtocolSpec load_protocol(const std::filesystem::path &config);
void save_protocol(const std::filesystem::path &config, const ProtocolSpec &p);

struct CorpusFile {
  std::string uri;
  std::filesystem::path wav_path;
  Waveform waveform;
  Annotation reference;
  Timeline uem;
};

// Reads audio, the file's tracks from its RTTM and its UEM (whole file when
// none is given).
CorpusFile load_file(const FileEntry &entry);
std::vector<CorpusFile> load_split(const ProtocolSpec &p, const std::string &split);

// ---------------------------------------------------------------------------
// Synthetic conversations.

struct SynthSpec {
  int n_speakers = 6;
  int n_train = 20;
  int n_dev = 5;
  int n_eval = 5;
  double file_duration = 60.0;
  int speakers_per_file_min = 2;
  int speakers_per_file_max = 4;
  double turn_mean = 3.0;
  double turn_std = 1.5;
  double turn_min = 0.5;
  double pause_probability = 0.3;
  double pause_min = 0.3;
  double pause_max = 1.5;
  double overlap_probability = 0.1;
  double overlap_min = 0.3;
  double overlap_max = 1.0;
  double noise_level = 0.003;  // std of the white background noise
  int n_noise_files = 3;
  double noise_duration = 10.0;
  int sample_rate = 16000;
  unsigned long long rng_seed = 0;

  void validate() const;  // throws ValidationError
};

SynthSpec synth_spec_from_json(const std::string &text);
std::string synth_spec_to_json(const SynthSpec &s);

// Harmonic voice of one synthetic speaker.
struct Voice {
  double f0 = 100.0;            // Hz
  std::vector<double> formants;  // Hz
  double am_rate = 4.0;          // Hz
  double am_phase = 0.0;
  double vibrato_phase = 0.0;
};

std::vector<Voice> make_voices(const SynthSpec &spec);

// Tracks of one conversation, times on a millisecond grid.
Annotation synth_conversation(const SynthSpec &spec, const std::string &uri,
                              unsigned long long seed);
// Audio of an annotation: each track voiced by speaker "spk<k>".
Waveform render(const SynthSpec &spec, const std::vector<Voice> &voices,
                const Annotation &a, unsigned long long seed);

// Writes wav/, rttm/, uem/, noise/ and protocol.json under out_dir, plus
// synth.json with the spec. Files are generated on `workers` threads with
// per-file seeds, so the output does not depend on the worker count.
ProtocolSpec generate_corpus(const SynthSpec &spec,
                             const std::filesystem::path &out_dir,
                             int workers = 1);

}  // namespace diarkit
