#include <cmath>
#include <stdexcept>

#include "diarkit/nnet.hpp"

namespace diarkit::nn {

SlidingSpec sliding_spec(double window_duration,
                         const SlidingWindowGeometry &frames) {
  SlidingSpec s;
  s.window_frames = std::max(1L, std::lround(window_duration / frames.step));
  s.step_frames = std::max(1L, std::lround(0.1 * s.window_frames));
  return s;
}

std::vector<long> window_starts(long total_frames, const SlidingSpec &spec) {
  if (spec.window_frames < 1 || spec.step_frames < 1) {
    throw std::invalid_argument("sliding window and step must be >= 1 frame");
  }
  std::vector<long> starts;
  if (total_frames <= spec.window_frames) return {0};
  long s = 0;
  for (; s + spec.window_frames <= total_frames; s += spec.step_frames) {
    starts.push_back(s);
  }
  if (starts.back() + spec.window_frames < total_frames) {
    starts.push_back(total_frames - spec.window_frames);
  }
  return starts;
}

Matrix reflect_rows(const Matrix &data, long first, long n) {
  const long t = data.rows();
  if (t == 0) throw std::invalid_argument("reflect_rows: empty input");
  Matrix out(n, data.cols());
  const long period = 2 * (t - 1);
  for (long i = 0; i < n; ++i) {
    long j = first + i;
    if (period == 0) {
      j = 0;
    } else {
      j %= period;
      if (j < 0) j += period;
      if (j >= t) j = period - j;
    }
    out.row(i) = data.row(j);
  }
  return out;
}

SlidingWindowFeature apply_sliding(const WindowScorer &scorer,
                                   const SlidingWindowFeature &features,
                                   const SlidingSpec &spec, long batch_size) {
  const long total = features.frames();
  if (total == 0) throw std::invalid_argument("apply_sliding: no frames");
  const long n = spec.window_frames;
  SlidingWindowFeature out;
  out.geometry = features.geometry;

  if (total < n) {
    const auto scores = scorer({reflect_rows(features.data, 0, n)});
    out.data = scores.front().topRows(total);
    return out;
  }

  const auto starts = window_starts(total, spec);
  Matrix sum;
  std::vector<long> count(total, 0);
  for (std::size_t first = 0; first < starts.size();
       first += static_cast<std::size_t>(batch_size)) {
    const std::size_t last =
        std::min(starts.size(), first + static_cast<std::size_t>(batch_size));
    std::vector<Matrix> windows;
    for (std::size_t w = first; w < last; ++w) {
      windows.push_back(features.data.middleRows(starts[w], n));
    }
    const auto scores = scorer(windows);
    for (std::size_t w = first; w < last; ++w) {
      const Matrix &s = scores[w - first];
      if (sum.size() == 0) sum = Matrix::Zero(total, s.cols());
      for (long i = 0; i < n; ++i) {
        sum.row(starts[w] + i) += s.row(i);
        ++count[starts[w] + i];
      }
    }
  }
  out.data = sum;
  for (long f = 0; f < total; ++f) {
    out.data.row(f) /= static_cast<double>(count[f]);
  }
  return out;
}

SlidingWindowFeature apply_sliding(const SequenceModel &model,
                                   const SlidingWindowFeature &features,
                                   const SlidingSpec &spec) {
  if (model.arch().head != Head::softmax) {
    throw std::invalid_argument("apply_sliding needs a frame-level model");
  }
  return apply_sliding(
      [&model](const std::vector<Matrix> &w) { return model.predict(w); },
      features, spec);
}

}  // namespace diarkit::nn
