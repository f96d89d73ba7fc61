#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "diarkit/core.hpp"

namespace diarkit {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  long size() const { return static_cast<long>(samples.size()); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Samples [first, first + n), zero-filled past the end.
  Waveform slice(long first, long n) const;
};

// PCM 16-bit mono only; samples scaled by 1/32768.
Waveform read_wav(const std::filesystem::path &path);
// Samples clipped to [-1, 1] and quantized to PCM 16-bit mono.
void write_wav(const std::filesystem::path &path, const Waveform &w);

double rms(const std::vector<double> &x);

// Frame-aligned matrix: one row per frame.
struct SlidingWindowFeature {
  Eigen::MatrixXd data;
  SlidingWindowGeometry geometry;

  long frames() const { return data.rows(); }
  long dims() const { return data.cols(); }
  double duration() const {
    return frames() == 0 ? 0.0
                         : geometry.frame(frames() - 1).end - geometry.start;
  }
  // Rows [first, first + n) with geometry shifted accordingly.
  SlidingWindowFeature slice(long first, long n) const;
};

struct MfccConfig {
  int sample_rate = 16000;
  double window = 0.025;
  double step = 0.010;
  int n_fft = 512;
  int n_mels = 40;
  double fmin = 0.0;
  double fmax = 8000.0;
  int n_ceps = 19;
  // Keep c0 (log-energy term of the DCT) as the first cepstrum.
  bool include_c0 = false;
  double preemphasis = 0.97;
  int delta_order = 2;
  int delta_window = 2;

  int window_samples() const;
  int step_samples() const;
  int dims() const { return n_ceps * (1 + delta_order); }
  SlidingWindowGeometry geometry() const { return {0.0, step, window}; }

  friend bool operator==(const MfccConfig &, const MfccConfig &) = default;
};

// Pre-emphasis, Hamming window, power spectrum, triangular mel filterbank,
// log, DCT-II, then regression deltas. Throws FormatError when the audio is
// shorter than one window or at another sample rate.
SlidingWindowFeature mfcc(const Waveform &w, const MfccConfig &cfg = {});

struct FeatureStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
};

FeatureStats feature_stats(const Eigen::MatrixXd &data);
// (x - mean) / max(std, 1e-8), column-wise.
Eigen::MatrixXd normalize(const Eigen::MatrixXd &data, const FeatureStats &s);
// mfcc() followed by normalisation with the file's own statistics.
SlidingWindowFeature normalized_mfcc(const Waveform &w, const MfccConfig &cfg = {});

// ---------------------------------------------------------------------------
// On-the-fly augmentation.

struct AugmentSpec {
  std::string noise_dir;
  double noise_probability = 0.0;
  double snr_min = 5.0;
  double snr_max = 20.0;
  double overlap_probability = 0.0;
  double overlap_snr_min = 0.0;
  double overlap_snr_max = 10.0;
  unsigned long long rng_seed = 0;

  void validate() const;
};

// Mixing gain so that rms(chunk) / rms(gain * noise) = 10^(snr/20).
double noise_gain(double chunk_rms, double noise_rms, double snr_db);

// chunk + gain * noise, then divided by the peak if it exceeds 1. `noise` is
// looped when shorter than `chunk`; otherwise the window starting at
// `noise_offset` is used. A silent chunk is returned unchanged.
Waveform add_noise(const Waveform &chunk, const Waveform &noise,
                   double snr_db, long noise_offset = 0);
// Same, with a random crop offset when the noise is longer than the chunk.
Waveform add_noise(const Waveform &chunk, const Waveform &noise,
                   double snr_db, std::mt19937_64 &rng);

struct OverlapSample {
  Waveform waveform;
  std::vector<int> labels;  // 1 where at least two speakers are active
};

// Weighted sum of two chunks, `b` mixed at snr_db relative to `a`.
// `speakers_*` hold the per-frame number of active speakers of each chunk.
OverlapSample synth_overlap(const Waveform &a,
                            const std::vector<int> &speakers_a,
                            const Waveform &b,
                            const std::vector<int> &speakers_b, double snr_db);

// Flat folder of WAV files, loaded in file-name order.
class NoiseBank {
 public:
  NoiseBank() = default;
  explicit NoiseBank(const std::filesystem::path &dir);

  bool empty() const { return noises_.empty(); }
  std::size_t size() const { return noises_.size(); }
  const Waveform &operator[](std::size_t i) const { return noises_[i]; }
  const Waveform &pick(std::mt19937_64 &rng) const;

 private:
  std::vector<Waveform> noises_;
};

}  // namespace diarkit
