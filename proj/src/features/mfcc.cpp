#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "diarkit/error.hpp"
#include "diarkit/features.hpp"

namespace diarkit {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// [n_mels x (n_fft/2 + 1)] triangular filters, evenly spaced on the mel scale.
Eigen::MatrixXd mel_filterbank(const MfccConfig &cfg) {
  const int bins = cfg.n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > left && f <= centre) {
        w = (f - left) / (centre - left);
      } else if (f > centre && f < right) {
        w = (right - f) / (right - centre);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

// Orthonormal DCT-II rows for the retained cepstra.
Eigen::MatrixXd dct_matrix(const MfccConfig &cfg) {
  const int first = cfg.include_c0 ? 0 : 1;
  const int m = cfg.n_mels;
  Eigen::MatrixXd d(cfg.n_ceps, m);
  for (int i = 0; i < cfg.n_ceps; ++i) {
    const int k = first + i;
    const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int j = 0; j < m; ++j) {
      d(i, j) = scale * std::cos(std::numbers::pi * k * (j + 0.5) / m);
    }
  }
  return d;
}

// Regression deltas over +-n frames with edge replication.
Eigen::MatrixXd deltas(const Eigen::MatrixXd &x, int n) {
  const long t = x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t, x.cols());
  double denom = 0.0;
  for (int k = 1; k <= n; ++k) denom += 2.0 * k * k;
  for (long i = 0; i < t; ++i) {
    for (int k = 1; k <= n; ++k) {
      const long ahead = std::min(t - 1, i + k);
      const long behind = std::max(0L, i - k);
      out.row(i) += k * (x.row(ahead) - x.row(behind));
    }
  }
  return out / denom;
}

}  // namespace

int MfccConfig::window_samples() const {
  return static_cast<int>(std::lround(window * sample_rate));
}

int MfccConfig::step_samples() const {
  return static_cast<int>(std::lround(step * sample_rate));
}

SlidingWindowFeature mfcc(const Waveform &w, const MfccConfig &cfg) {
  if (w.sample_rate != cfg.sample_rate) {
    throw FormatError("mfcc: expected " + std::to_string(cfg.sample_rate) +
                      " Hz audio, got " + std::to_string(w.sample_rate));
  }
  const long win = cfg.window_samples();
  const long hop = cfg.step_samples();
  if (w.size() < win) {
    throw FormatError("mfcc: audio shorter than one analysis window");
  }
  if (win > cfg.n_fft) throw FormatError("mfcc: window longer than FFT size");
  const long frames = (w.size() - win) / hop + 1;
  const int bins = cfg.n_fft / 2 + 1;

  std::vector<double> hamming(win);
  for (long i = 0; i < win; ++i) {
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(cfg.n_fft);
  std::vector<std::complex<double>> spec;
  Eigen::MatrixXd power(frames, bins);
  for (long t = 0; t < frames; ++t) {
    const double *x = w.samples.data() + t * hop;
    std::fill(buf.begin(), buf.end(), 0.0);
    // Pre-emphasis within the frame so that each frame depends only on
    // its own samples.
    for (long i = 0; i < win; ++i) {
      const double prev = i == 0 ? x[0] : x[i - 1];
      buf[i] = (x[i] - cfg.preemphasis * prev) * hamming[i];
    }
    fft.fwd(spec, buf);
    for (int k = 0; k < bins; ++k) power(t, k) = std::norm(spec[k]);
  }

  Eigen::MatrixXd logmel = power * mel_filterbank(cfg).transpose();
  logmel = logmel.array().max(1e-10).log().matrix();
  const Eigen::MatrixXd ceps = logmel * dct_matrix(cfg).transpose();

  SlidingWindowFeature out;
  out.geometry = cfg.geometry();
  out.data.resize(frames, cfg.dims());
  out.data.leftCols(cfg.n_ceps) = ceps;
  Eigen::MatrixXd prev = ceps;
  for (int order = 1; order <= cfg.delta_order; ++order) {
    prev = deltas(prev, cfg.delta_window);
    out.data.middleCols(order * cfg.n_ceps, cfg.n_ceps) = prev;
  }
  return out;
}

FeatureStats feature_stats(const Eigen::MatrixXd &data) {
  FeatureStats s;
  s.mean = data.colwise().mean();
  const Eigen::MatrixXd centred = data.rowwise() - s.mean;
  s.std = (centred.array().square().colwise().sum() /
           std::max<double>(1.0, static_cast<double>(data.rows())))
              .sqrt()
              .matrix();
  return s;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd &data, const FeatureStats &s) {
  const Eigen::RowVectorXd inv = s.std.array().max(1e-8).inverse().matrix();
  return ((data.rowwise() - s.mean).array().rowwise() * inv.array()).matrix();
}

SlidingWindowFeature normalized_mfcc(const Waveform &w, const MfccConfig &cfg) {
  SlidingWindowFeature f = mfcc(w, cfg);
  f.data = normalize(f.data, feature_stats(f.data));
  return f;
}

}  // namespace diarkit
