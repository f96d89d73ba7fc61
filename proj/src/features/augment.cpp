#include <algorithm>
#include <cmath>

#include "diarkit/error.hpp"
#include "diarkit/features.hpp"

namespace diarkit {

void AugmentSpec::validate() const {
  if (snr_min > snr_max) throw ValidationError("augment: snr_min > snr_max");
  if (overlap_snr_min > overlap_snr_max) {
    throw ValidationError("augment: overlap_snr_min > overlap_snr_max");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(overlap_probability) || !prob(noise_probability)) {
    throw ValidationError("augment: probabilities must lie in [0, 1]");
  }
}

double noise_gain(double chunk_rms, double noise_rms, double snr_db) {
  if (chunk_rms == 0.0 || noise_rms == 0.0) return 0.0;
  return chunk_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));
}

Waveform add_noise(const Waveform &chunk, const Waveform &noise,
                   double snr_db, long noise_offset) {
  if (chunk.sample_rate != noise.sample_rate) {
    throw FormatError("add_noise: sample rates differ");
  }
  const double chunk_rms = rms(chunk.samples);
  if (chunk_rms == 0.0 || noise.samples.empty()) return chunk;

  const long n = chunk.size();
  std::vector<double> aligned(n);
  if (noise.size() >= n) {
    const long off = std::clamp(noise_offset, 0L, noise.size() - n);
    std::copy_n(noise.samples.begin() + off, n, aligned.begin());
  } else {
    for (long i = 0; i < n; ++i) aligned[i] = noise.samples[i % noise.size()];
  }

  const double gain = noise_gain(chunk_rms, rms(aligned), snr_db);
  if (gain == 0.0) return chunk;
  Waveform out = chunk;
  double peak = 0.0;
  for (long i = 0; i < n; ++i) {
    out.samples[i] += gain * aligned[i];
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  if (peak > 1.0) {
    for (double &s : out.samples) s /= peak;
  }
  return out;
}

Waveform add_noise(const Waveform &chunk, const Waveform &noise,
                   double snr_db, std::mt19937_64 &rng) {
  long offset = 0;
  if (noise.size() > chunk.size()) {
    offset = std::uniform_int_distribution<long>(
        0, noise.size() - chunk.size())(rng);
  }
  return add_noise(chunk, noise, snr_db, offset);
}

OverlapSample synth_overlap(const Waveform &a,
                            const std::vector<int> &speakers_a,
                            const Waveform &b,
                            const std::vector<int> &speakers_b,
                            double snr_db) {
  if (a.size() != b.size() || speakers_a.size() != speakers_b.size()) {
    throw std::invalid_argument("synth_overlap: chunk lengths differ");
  }
  if (a.sample_rate != b.sample_rate) {
    throw FormatError("synth_overlap: sample rates differ");
  }
  OverlapSample out;
  out.waveform = add_noise(a, b, snr_db, 0);
  // A silent `a` is returned unchanged by add_noise; the mixture is then `b`.
  if (rms(a.samples) == 0.0) out.waveform = b;
  out.labels.resize(speakers_a.size());
  for (std::size_t t = 0; t < speakers_a.size(); ++t) {
    out.labels[t] = speakers_a[t] + speakers_b[t] >= 2 ? 1 : 0;
  }
  return out;
}

NoiseBank::NoiseBank(const std::filesystem::path &dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("noise directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto &f : files) noises_.push_back(read_wav(f));
}

const Waveform &NoiseBank::pick(std::mt19937_64 &rng) const {
  return noises_[std::uniform_int_distribution<std::size_t>(
      0, noises_.size() - 1)(rng)];
}

}  // namespace diarkit
