#include <cmath>
#include <stdexcept>

#include "diarkit/labeling.hpp"

namespace diarkit {

LabeledFile make_labeled_file(const std::string &uri, Waveform waveform,
                              const Annotation &ref,
                              const LabelingOptions &opt) {
  LabeledFile f;
  f.uri = uri;
  const SlidingWindowFeature raw = mfcc(waveform, opt.mfcc);
  f.stats = feature_stats(raw.data);
  f.features.data = normalize(raw.data, f.stats);
  f.features.geometry = raw.geometry;
  f.waveform = std::move(waveform);
  const long frames = raw.frames();
  f.speakers = speaker_count(ref, raw.geometry, frames);
  switch (opt.task) {
    case Task::vad:
      f.labels = vad_labels(ref, raw.geometry, frames).labels;
      break;
    case Task::scd:
      f.labels = scd_labels(ref, raw.geometry, frames, opt.scd).labels;
      break;
    case Task::osd:
      f.labels = osd_labels(ref, raw.geometry, frames).labels;
      break;
  }
  return f;
}

namespace {

std::vector<int> slice_padded(const std::vector<int> &v, long first, long n) {
  std::vector<int> out(n, 0);
  for (long i = 0; i < n; ++i) {
    const long k = first + i;
    if (k >= 0 && k < static_cast<long>(v.size())) out[i] = v[k];
  }
  return out;
}

}  // namespace

ChunkObjective::ChunkObjective(const nn::SequenceModel &model,
                               std::span<const LabeledFile> files,
                               const LabelingOptions &opt, long chunk_frames,
                               int batch_size)
    : model_(model),
      files_(files),
      opt_(opt),
      chunk_frames_(chunk_frames),
      batch_size_(batch_size) {
  if (files_.empty()) throw std::invalid_argument("empty training set");
  if (chunk_frames_ < 1) throw std::invalid_argument("chunk shorter than a frame");
  opt_.augment.validate();
  for (const auto &f : files_) total_frames_ += f.features.frames();
  if (total_frames_ == 0) throw std::invalid_argument("training set has no frames");
  if (!opt_.augment.noise_dir.empty() && opt_.augment.noise_probability > 0.0) {
    noise_ = NoiseBank(opt_.augment.noise_dir);
  }
}

int ChunkObjective::batches_per_epoch() const {
  const double per_batch = static_cast<double>(chunk_frames_) * batch_size_;
  return static_cast<int>(std::ceil(static_cast<double>(total_frames_) / per_batch));
}

std::pair<std::size_t, long> ChunkObjective::draw_position(
    std::mt19937_64 &rng) const {
  long k = std::uniform_int_distribution<long>(0, total_frames_ - 1)(rng);
  std::size_t f = 0;
  while (k >= files_[f].features.frames()) {
    k -= files_[f].features.frames();
    ++f;
  }
  const long room = files_[f].features.frames() - chunk_frames_;
  const long start =
      room > 0 ? std::uniform_int_distribution<long>(0, room)(rng) : 0;
  return {f, start};
}

Waveform ChunkObjective::chunk_audio(const LabeledFile &f, long start) const {
  const long hop = opt_.mfcc.step_samples();
  const long win = opt_.mfcc.window_samples();
  return f.waveform.slice(start * hop, (chunk_frames_ - 1) * hop + win);
}

ChunkObjective::Chunk ChunkObjective::draw(std::mt19937_64 &rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto [fi, start] = draw_position(rng);
  const LabeledFile &file = files_[fi];
  const bool with_overlap = opt_.task == Task::osd &&
                            unit(rng) < opt_.augment.overlap_probability;
  const bool with_noise =
      !noise_.empty() && unit(rng) < opt_.augment.noise_probability;

  Chunk c;
  if (!with_overlap && !with_noise) {
    c.features = nn::reflect_rows(file.features.data, start, chunk_frames_);
    if (file.features.frames() >= chunk_frames_) {
      c.labels = slice_padded(file.labels, start, chunk_frames_);
    } else {
      // Mirror the labels the same way as the features.
      const long t = file.features.frames();
      nn::Matrix idx(t, 1);
      for (long i = 0; i < t; ++i) idx(i, 0) = static_cast<double>(i);
      const nn::Matrix r = nn::reflect_rows(idx, start, chunk_frames_);
      for (long i = 0; i < chunk_frames_; ++i) {
        c.labels.push_back(file.labels[static_cast<long>(r(i, 0))]);
      }
    }
    return c;
  }

  Waveform audio = chunk_audio(file, start);
  c.labels = slice_padded(file.labels, start, chunk_frames_);
  if (with_overlap) {
    const auto [fj, start_b] = draw_position(rng);
    const Waveform other = chunk_audio(files_[fj], start_b);
    const double snr = std::uniform_real_distribution<double>(
        opt_.augment.overlap_snr_min, opt_.augment.overlap_snr_max)(rng);
    OverlapSample mix = synth_overlap(
        audio, slice_padded(file.speakers, start, chunk_frames_), other,
        slice_padded(files_[fj].speakers, start_b, chunk_frames_), snr);
    audio = std::move(mix.waveform);
    c.labels = std::move(mix.labels);
  }
  if (with_noise) {
    const Waveform &noise = noise_.pick(rng);
    const double snr = std::uniform_real_distribution<double>(
        opt_.augment.snr_min, opt_.augment.snr_max)(rng);
    audio = add_noise(audio, noise, snr, rng);
  }
  c.features = normalize(mfcc(audio, opt_.mfcc).data, file.stats);
  return c;
}

nn::Var ChunkObjective::loss(nn::Tape &tape,
                             std::span<const nn::BoundParams> params,
                             std::mt19937_64 &rng) {
  std::vector<nn::Matrix> feats;
  std::vector<std::vector<int>> labels;
  for (int b = 0; b < batch_size_; ++b) {
    Chunk c = draw(rng);
    feats.push_back(std::move(c.features));
    labels.push_back(std::move(c.labels));
  }
  // Targets in the same t-major order as the stacked inputs.
  std::vector<int> flat(chunk_frames_ * batch_size_);
  for (long t = 0; t < chunk_frames_; ++t) {
    for (int b = 0; b < batch_size_; ++b) flat[t * batch_size_ + b] = labels[b][t];
  }
  const nn::Var logits = model_.forward(tape, params[0],
                                        nn::stack_time_major(feats),
                                        chunk_frames_, batch_size_);
  return nn::softmax_cross_entropy(logits, flat, opt_.class_weights);
}

TrainedLabeler train_labeler(std::span<const LabeledFile> files,
                             const LabelingOptions &opt,
                             const nn::ArchSpec &arch,
                             const nn::TrainSpec &spec,
                             const nn::EpochCallback &on_epoch) {
  if (files.empty()) throw std::invalid_argument("empty training set");
  if (arch.input_dim != opt.mfcc.dims()) {
    throw std::invalid_argument("arch input_dim does not match features");
  }
  spec.validate();
  TrainedLabeler out{nn::SequenceModel(arch, spec.rng_seed), {}};
  const long chunk_frames =
      std::max(1L, std::lround(spec.chunk_duration / opt.mfcc.step));
  ChunkObjective objective(out.model, files, opt, chunk_frames, spec.batch_size);
  nn::ParamSet *params[] = {&out.model.params()};
  out.log = nn::fit(params, objective, spec, on_epoch);
  return out;
}

}  // namespace diarkit
