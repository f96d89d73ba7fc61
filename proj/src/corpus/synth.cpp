#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <thread>

#include "diarkit/corpus.hpp"
#include "diarkit/error.hpp"
#include "diarkit/rttm.hpp"

namespace diarkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kTableSize = 2048;
constexpr double kVibratoDepth = 0.02;
constexpr double kVibratoRate = 0.7;
constexpr double kGain = 0.25;
constexpr double kFade = 0.005;

double ms(double t) { return std::round(t * 1000.0) / 1000.0; }

unsigned long long derive_seed(unsigned long long base, unsigned a, unsigned b) {
  std::seed_seq seq{static_cast<unsigned>(base & 0xffffffffu),
                    static_cast<unsigned>(base >> 32), a, b};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<unsigned long long>(out[0]) << 32) | out[1];
}

int speaker_index(const std::string &label) {
  if (label.rfind("spk", 0) != 0) {
    throw ValidationError("synthetic label must be spk<k>, got '" + label + "'");
  }
  return std::stoi(label.substr(3));
}

std::vector<double> wavetable(const Voice &v, int sample_rate,
                              std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<double> table(kTableSize, 0.0);
  const double top = std::min(4000.0, 0.45 * sample_rate);
  for (int h = 1; h * v.f0 < top; ++h) {
    const double f = h * v.f0;
    double a = 0.2 / h;
    for (double formant : v.formants) {
      const double z = (f - formant) / 150.0;
      a += std::exp(-0.5 * z * z);
    }
    const double ph = phase(rng);
    for (int i = 0; i < kTableSize; ++i) {
      table[i] += a * std::sin(kTwoPi * h * i / kTableSize + ph);
    }
  }
  double peak = 0.0;
  for (double x : table) peak = std::max(peak, std::abs(x));
  for (double &x : table) x /= peak;
  return table;
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string &m) { throw ValidationError("synth: " + m); };
  if (n_speakers < 1) fail("n_speakers must be >= 1");
  if (n_train < 0 || n_dev < 0 || n_eval < 0) fail("file counts must be >= 0");
  if (!(file_duration > 0.0)) fail("file_duration must be > 0");
  if (speakers_per_file_min < 1 || speakers_per_file_max < speakers_per_file_min) {
    fail("need 1 <= speakers_per_file_min <= speakers_per_file_max");
  }
  if (!(turn_mean > 0.0) || turn_std < 0.0 || !(turn_min > 0.0)) {
    fail("turn durations must be > 0");
  }
  for (double p : {pause_probability, overlap_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  if (pause_probability + overlap_probability > 1.0) {
    fail("pause_probability + overlap_probability must be <= 1");
  }
  if (!(pause_min > 0.0) || pause_max < pause_min) fail("bad pause range");
  if (!(overlap_min > 0.0) || overlap_max < overlap_min) fail("bad overlap range");
  if (noise_level < 0.0) fail("noise_level must be >= 0");
  if (n_noise_files < 0 || !(noise_duration > 0.0)) fail("bad noise settings");
  if (sample_rate <= 0) fail("sample_rate must be > 0");
}

#define DIARKIT_SYNTH_FIELDS(X)                                              \
  X(n_speakers) X(n_train) X(n_dev) X(n_eval) X(file_duration)               \
  X(speakers_per_file_min) X(speakers_per_file_max) X(turn_mean) X(turn_std) \
  X(turn_min) X(pause_probability) X(pause_min) X(pause_max)                 \
  X(overlap_probability) X(overlap_min) X(overlap_max) X(noise_level)        \
  X(n_noise_files) X(noise_duration) X(sample_rate) X(rng_seed)

SynthSpec synth_spec_from_json(const std::string &text) {
  SynthSpec s;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("synth spec must be a JSON object");
  for (const auto &[key, value] : j.items()) {
    bool known = false;
    try {
#define X(f)                      \
  if (key == #f) {                \
    value.get_to(s.f);            \
    known = true;                 \
  }
      DIARKIT_SYNTH_FIELDS(X)
#undef X
    } catch (const json::exception &e) {
      throw ValidationError("synth spec: field '" + key + "': " + e.what());
    }
    if (!known) throw ValidationError("synth spec: unknown field '" + key + "'");
  }
  s.validate();
  return s;
}

std::string synth_spec_to_json(const SynthSpec &s) {
  json j;
#define X(f) j[#f] = s.f;
  DIARKIT_SYNTH_FIELDS(X)
#undef X
  return j.dump(2);
}

std::vector<Voice> make_voices(const SynthSpec &spec) {
  std::mt19937_64 rng(derive_seed(spec.rng_seed, 0xF0, 0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double band = 210.0 / spec.n_speakers;
  std::vector<Voice> voices;
  for (int k = 0; k < spec.n_speakers; ++k) {
    Voice v;
    v.f0 = 90.0 + band * (k + 0.5) + band * 0.4 * (u(rng) - 0.5);
    v.formants = {300.0 + 600.0 * u(rng), 900.0 + 1400.0 * u(rng),
                  2300.0 + 1200.0 * u(rng)};
    v.am_rate = 3.0 + 3.0 * u(rng);
    v.am_phase = kTwoPi * u(rng);
    v.vibrato_phase = kTwoPi * u(rng);
    voices.push_back(v);
  }
  return voices;
}

Annotation synth_conversation(const SynthSpec &spec, const std::string &uri,
                              unsigned long long seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const int hi = std::min(spec.speakers_per_file_max, spec.n_speakers);
  const int lo = std::min(spec.speakers_per_file_min, hi);
  const int count = std::uniform_int_distribution<int>(lo, hi)(rng);
  std::vector<int> pool(spec.n_speakers);
  for (int k = 0; k < spec.n_speakers; ++k) pool[k] = k;
  for (int k = 0; k < count; ++k) {
    const int j = std::uniform_int_distribution<int>(k, spec.n_speakers - 1)(rng);
    std::swap(pool[k], pool[j]);
  }
  std::vector<int> speakers(pool.begin(), pool.begin() + count);
  std::sort(speakers.begin(), speakers.end());

  Annotation a(uri);
  std::normal_distribution<double> turn(spec.turn_mean, spec.turn_std);
  std::map<int, double> busy_until;
  const double stop = spec.file_duration - 0.05;
  double t = ms(uniform(0.2, 1.0));
  int prev = -1;
  while (t + spec.turn_min <= stop) {
    std::vector<int> free_now, other;
    for (int k : speakers) {
      if (busy_until[k] <= t) {
        free_now.push_back(k);
        if (k != prev) other.push_back(k);
      }
    }
    if (free_now.empty()) {
      double next = stop;
      for (int k : speakers) next = std::min(next, busy_until[k]);
      t = next;
      continue;
    }
    const auto &cands = other.empty() ? free_now : other;
    const int spk =
        cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
    const double len = std::max(spec.turn_min, turn(rng));
    const double end = ms(std::min(t + len, stop));
    if (end - t < spec.turn_min) break;
    a.add({t, end}, "spk" + std::to_string(spk));
    busy_until[spk] = end;

    const double r = u(rng);
    double next = end;
    if (r < spec.overlap_probability) {
      const double ov = uniform(spec.overlap_min, spec.overlap_max);
      next = std::max(end - ov, t + 0.5 * spec.turn_min);
    } else if (r < spec.overlap_probability + spec.pause_probability) {
      next = end + uniform(spec.pause_min, spec.pause_max);
    }
    t = ms(std::min(next, end + spec.pause_max));
    prev = spk;
  }
  return a;
}

Waveform render(const SynthSpec &spec, const std::vector<Voice> &voices,
                const Annotation &a, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  const int sr = spec.sample_rate;
  Waveform w;
  w.sample_rate = sr;
  w.samples.assign(static_cast<std::size_t>(std::lround(spec.file_duration * sr)), 0.0);

  std::vector<std::vector<double>> tables;
  std::mt19937_64 table_rng(derive_seed(spec.rng_seed, 0xF1, 0));
  for (const auto &v : voices) tables.push_back(wavetable(v, sr, table_rng));

  for (const auto &track : a.tracks()) {
    const int k = speaker_index(track.label);
    if (k < 0 || k >= static_cast<int>(voices.size())) {
      throw ValidationError("no voice for label '" + track.label + "'");
    }
    const Voice &v = voices[k];
    const auto &table = tables[k];
    const long first = std::lround(track.segment.start * sr);
    const long last = std::min<long>(std::lround(track.segment.end * sr), w.size());
    const double wv = kTwoPi * kVibratoRate;
    for (long n = first; n < last; ++n) {
      const double t = static_cast<double>(n) / sr;
      // Integral of f0 (1 + depth sin(wv t + phase)).
      double cycles = v.f0 * t -
                      v.f0 * kVibratoDepth * std::cos(wv * t + v.vibrato_phase) / wv;
      cycles -= std::floor(cycles);
      const double pos = cycles * kTableSize;
      const int i0 = static_cast<int>(pos) % kTableSize;
      const int i1 = (i0 + 1) % kTableSize;
      const double frac = pos - std::floor(pos);
      const double s = table[i0] + frac * (table[i1] - table[i0]);
      const double am = 0.6 + 0.4 * std::sin(kTwoPi * v.am_rate * t + v.am_phase);
      const double edge = std::min(t - track.segment.start, track.segment.end - t);
      const double fade = std::clamp(edge / kFade, 0.0, 1.0);
      w.samples[n] += kGain * am * fade * s;
    }
  }
  if (spec.noise_level > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_level);
    for (double &x : w.samples) x += noise(rng);
  }
  return w;
}

ProtocolSpec generate_corpus(const SynthSpec &spec, const fs::path &out_dir,
                             int workers) {
  spec.validate();
  for (const char *sub : {"wav", "rttm", "uem", "noise"}) {
    fs::create_directories(out_dir / sub);
  }
  const auto voices = make_voices(spec);

  struct Job {
    std::string split;
    std::string uri;
    unsigned long long seed;
  };
  std::vector<Job> jobs;
  ProtocolSpec protocol;
  protocol.name = "synthetic";
  protocol.noise_dir = out_dir / "noise";
  const std::pair<const char *, int> splits[] = {
      {"train", spec.n_train}, {"dev", spec.n_dev}, {"eval", spec.n_eval}};
  unsigned split_index = 0;
  for (const auto &[name, n] : splits) {
    auto &list = protocol.splits[name];
    for (int i = 0; i < n; ++i) {
      char uri[64];
      std::snprintf(uri, sizeof uri, "%s_%03d", name, i);
      jobs.push_back({name, uri, derive_seed(spec.rng_seed, split_index + 1, i)});
      list.push_back({uri, out_dir / "wav" / (std::string(uri) + ".wav"),
                      out_dir / "rttm" / (std::string(uri) + ".rttm"),
                      out_dir / "uem" / (std::string(uri) + ".uem")});
    }
    ++split_index;
  }

  auto make = [&](const Job &job) {
    const Annotation a = synth_conversation(spec, job.uri, job.seed);
    const Waveform w = render(spec, voices, a, job.seed ^ 0x9e3779b97f4a7c15ULL);
    write_wav(out_dir / "wav" / (job.uri + ".wav"), w);
    write_rttm(out_dir / "rttm" / (job.uri + ".rttm"), {{job.uri, a}});
    write_uem(out_dir / "uem" / (job.uri + ".uem"),
              {{job.uri, Timeline({{0.0, spec.file_duration}})}});
  };
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        make(jobs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, workers); ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (int i = 0; i < spec.n_noise_files; ++i) {
    std::mt19937_64 rng(derive_seed(spec.rng_seed, 0xA0, i));
    std::normal_distribution<double> g(0.0, 1.0);
    Waveform n;
    n.sample_rate = spec.sample_rate;
    n.samples.resize(static_cast<std::size_t>(spec.noise_duration * spec.sample_rate));
    double state = 0.0;
    // Alternate white, low-passed and amplitude-modulated noise.
    for (std::size_t s = 0; s < n.samples.size(); ++s) {
      const double x = g(rng);
      const double t = static_cast<double>(s) / spec.sample_rate;
      switch (i % 3) {
        case 0: n.samples[s] = 0.1 * x; break;
        case 1:
          state = 0.95 * state + 0.05 * x;
          n.samples[s] = 0.8 * state;
          break;
        default:
          n.samples[s] = 0.1 * x * (0.5 + 0.5 * std::sin(kTwoPi * 1.5 * t));
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "noise_%02d.wav", i);
    write_wav(out_dir / "noise" / name, n);
  }

  save_protocol(out_dir / "protocol.json", protocol);
  std::ofstream(out_dir / "synth.json") << synth_spec_to_json(spec) << "\n";
  return protocol;
}

}  // namespace diarkit
