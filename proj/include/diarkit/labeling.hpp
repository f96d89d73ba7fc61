#pragma once

#include <span>
#include <string>
#include <vector>

#include "diarkit/core.hpp"
#include "diarkit/features.hpp"
#include "diarkit/nnet.hpp"

namespace diarkit {

// Per-frame class indices aligned with a feature sequence.
struct FrameLabels {
  std::vector<int> labels;
  SlidingWindowGeometry geometry;
  int num_classes = 2;

  long frames() const { return static_cast<long>(labels.size()); }
};

// Frame t is labelled from the reference at the middle of the frame.
FrameLabels vad_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames);
FrameLabels osd_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames);

struct ScdSpec {
  // Frames whose middle lies within `delta` seconds of a change point are
  // positive.
  double delta = 0.2;
};

// Instants where the set of active speakers changes (including speech
// onsets and offsets), sorted.
std::vector<double> change_points(const Annotation &ref);
FrameLabels scd_labels(const Annotation &ref, const SlidingWindowGeometry &g,
                       long frames, const ScdSpec &spec = {});

// Number of distinct labels active at each frame middle.
std::vector<int> speaker_count(const Annotation &ref,
                               const SlidingWindowGeometry &g, long frames);

// ---------------------------------------------------------------------------
// Score post-processing.

struct BinarizeParams {
  double threshold = 0.5;
  double min_duration_on = 0.1;
  double min_duration_off = 0.1;
};

// Runs of frames with score > threshold. Inner gaps shorter than
// min_duration_off are filled first, then runs shorter than min_duration_on
// are dropped. Frame runs map to time with SlidingWindowGeometry::span.
Timeline binarize(std::span<const double> scores,
                  const SlidingWindowGeometry &g, const BinarizeParams &p);
// Same on one column of a score matrix.
Timeline binarize(const SlidingWindowFeature &scores, int column,
                  const BinarizeParams &p);

struct PeakParams {
  double threshold = 0.5;
  double min_gap = 0.0;
};

// Strict local maxima above threshold; among peaks closer than min_gap the
// higher one wins (earlier on ties). Returns frame indices, increasing.
std::vector<long> peak_frames(std::span<const double> scores,
                              const SlidingWindowGeometry &g,
                              const PeakParams &p);
// Frame middles of peak_frames().
std::vector<double> peak_pick(std::span<const double> scores,
                              const SlidingWindowGeometry &g,
                              const PeakParams &p);

// Cuts every region of `regions` at the given times (those strictly inside).
Timeline split_at(const Timeline &regions, std::span<const double> times);

std::vector<double> column(const SlidingWindowFeature &scores, int c);

// ---------------------------------------------------------------------------
// Training data for the frame-labelling tasks.

enum class Task { vad, scd, osd };
std::string to_string(Task t);
Task task_from_string(const std::string &s);

struct LabeledFile {
  std::string uri;
  Waveform waveform;              // needed for waveform-level augmentation
  SlidingWindowFeature features;  // normalised with `stats`
  FeatureStats stats;
  std::vector<int> labels;    // training targets
  std::vector<int> speakers;  // active speaker count per frame
};

struct LabelingOptions {
  Task task = Task::vad;
  ScdSpec scd;
  MfccConfig mfcc;
  AugmentSpec augment;
  std::vector<double> class_weights;  // empty: unweighted
};

// Extracts and normalises features and builds the task targets.
LabeledFile make_labeled_file(const std::string &uri, Waveform waveform,
                              const Annotation &ref,
                              const LabelingOptions &opt);

// Random fixed-length chunks drawn from the training files, optionally
// augmented on the fly (additive noise, two-chunk overlap synthesis).
class ChunkObjective : public nn::Objective {
 public:
  ChunkObjective(const nn::SequenceModel &model,
                 std::span<const LabeledFile> files, const LabelingOptions &opt,
                 long chunk_frames, int batch_size);

  int batches_per_epoch() const override;
  nn::Var loss(nn::Tape &tape, std::span<const nn::BoundParams> params,
               std::mt19937_64 &rng) override;

 private:
  struct Chunk {
    nn::Matrix features;
    std::vector<int> labels;
  };
  Chunk draw(std::mt19937_64 &rng) const;
  std::pair<std::size_t, long> draw_position(std::mt19937_64 &rng) const;
  Waveform chunk_audio(const LabeledFile &f, long start) const;

  const nn::SequenceModel &model_;
  std::span<const LabeledFile> files_;
  LabelingOptions opt_;
  long chunk_frames_;
  int batch_size_;
  long total_frames_ = 0;
  NoiseBank noise_;
};

struct TrainedLabeler {
  nn::SequenceModel model;
  nn::TrainLog log;
};

// Throws std::invalid_argument on an empty training set.
TrainedLabeler train_labeler(std::span<const LabeledFile> files,
                             const LabelingOptions &opt,
                             const nn::ArchSpec &arch,
                             const nn::TrainSpec &spec,
                             const nn::EpochCallback &on_epoch = {});

// ---------------------------------------------------------------------------
// Re-segmentation.

struct ResegSpec {
  int epochs = 20;
  bool overlap_aware = false;
  nn::ArchSpec arch{57, 1, 16, nn::Cell::lstm, nn::Pooling::none, {16}, 2,
                    nn::Head::softmax};
  nn::TrainSpec train{2.0, 8, 20, nn::OptimizerKind::adam, 0.01, 5.0, 0, 0};
};

// Trains a (speakers + 1)-class labeller from scratch on `hypothesis` for
// spec.epochs passes over the file, then relabels each frame with its
// highest-scoring class (class 0 is non-speech). With overlap_aware, frames
// inside `overlap` also receive their second-best speaker class.
Annotation resegment(const std::string &uri,
                     const SlidingWindowFeature &features,
                     const Annotation &hypothesis, const ResegSpec &spec,
                     const Timeline &overlap = {});

// Stable 64-bit FNV-1a hash (seeds derived from uris).
unsigned long long fnv1a(const std::string &s);

}  // namespace diarkit
