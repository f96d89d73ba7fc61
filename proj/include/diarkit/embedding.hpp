#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "diarkit/core.hpp"
#include "diarkit/features.hpp"
#include "diarkit/nnet.hpp"

namespace diarkit {

enum class LossKind { triplet, contrastive, center, angular, congenerous };
std::string to_string(LossKind k);
// Accepts "triplet", "contrastive", "center", "additive-angular-margin",
// "congenerous-cosine".
LossKind loss_from_string(const std::string &s);

struct LossSpec {
  LossKind kind = LossKind::triplet;
  double margin = 0.2;
  double scale = 10.0;
  double center_weight = 0.01;    // lambda of the center loss
  double center_momentum = 0.95;  // EMA factor of the center update

  void validate() const;
};

// d(a, b) = 1 - <a, b> for every pair of unit rows.
nn::Var cosine_distance_matrix(const nn::Var &embeddings);

// Metric-learning loss over a batch of unit-norm embeddings.
//
//   triplet      mean over in-batch triplets of max(0, d(a,p) - d(a,n) + m)
//   contrastive  mean over pairs of y d^2 + (1 - y) max(0, m - d)^2
//   center       CE(E W) + lambda * mean ||e - c_y||^2, centers by EMA
//   angular      CE(s cos(theta_y + m), s cos(theta_j)), W columns normalised
//   congenerous  CE(s cos(e, c_j)) with c_j the batch centroid of class j
//
// center and angular own a [dim x classes] classifier (params()).
class EmbeddingLoss {
 public:
  EmbeddingLoss() = default;
  EmbeddingLoss(LossSpec spec, int dim, int classes, unsigned long long seed);

  const LossSpec &spec() const { return spec_; }
  bool has_params() const { return params_.size() > 0; }
  nn::ParamSet &params() { return params_; }
  const nn::ParamSet &params() const { return params_; }
  const nn::Matrix &centers() const { return centers_; }
  void set_centers(nn::Matrix c);

  // `head` is required when has_params(). Throws std::invalid_argument on a
  // single-speaker batch for triplet and contrastive.
  nn::Var operator()(nn::Tape &tape, const nn::Var &embeddings,
                     std::span<const int> labels,
                     const nn::BoundParams *head = nullptr) const;

  // EMA step of the center loss toward the batch class means.
  void update_centers(const nn::Matrix &embeddings, std::span<const int> labels);

 private:
  LossSpec spec_;
  int classes_ = 0;
  nn::ParamSet params_;
  nn::Matrix centers_;
  std::vector<bool> seen_;
};

// ---------------------------------------------------------------------------
// Inference.

// Unit-norm embedding of one chunk [T x D].
Eigen::RowVectorXd embed(const nn::SequenceModel &m, const nn::Matrix &chunk);

// Embedding of the frames [first, first + n): sub-chunks of chunk_frames
// laid out like sliding windows with step = chunk_frames (last one
// end-aligned), averaged then renormalised. Shorter spans are embedded as
// one reflect-padded chunk.
Eigen::RowVectorXd embed_span(const nn::SequenceModel &m,
                              const nn::Matrix &features, long first, long n,
                              long chunk_frames);

// ---------------------------------------------------------------------------
// Training.

struct SpeakerFile {
  std::string uri;
  SlidingWindowFeature features;  // normalised per file
  Annotation reference;
};

struct EmbeddingOptions {
  LossSpec loss;
  int speakers_per_batch = 8;
  int chunks_per_speaker = 4;
};

// Regions where exactly one speaker is active, per speaker label. Speaker
// labels are treated as global identities across files.
struct SpeakerRegion {
  std::size_t file = 0;
  Segment segment;
};
std::map<std::string, std::vector<SpeakerRegion>> single_speaker_regions(
    std::span<const SpeakerFile> files, double min_duration);

class EmbeddingObjective : public nn::Objective {
 public:
  EmbeddingObjective(const nn::SequenceModel &model, EmbeddingLoss &loss,
                     std::span<const SpeakerFile> files,
                     const EmbeddingOptions &opt, long chunk_frames);

  int batches_per_epoch() const override;
  nn::Var loss(nn::Tape &tape, std::span<const nn::BoundParams> params,
               std::mt19937_64 &rng) override;
  void after_step() override;

  const std::vector<std::string> &speakers() const { return speakers_; }

 private:
  const nn::SequenceModel &model_;
  EmbeddingLoss &loss_;
  std::span<const SpeakerFile> files_;
  EmbeddingOptions opt_;
  long chunk_frames_;
  std::vector<std::string> speakers_;
  std::vector<std::vector<SpeakerRegion>> regions_;
  std::vector<std::vector<double>> cumulative_;  // region durations
  double total_duration_ = 0.0;
  nn::Matrix last_embeddings_;
  std::vector<int> last_labels_;
};

struct TrainedEmbedding {
  nn::SequenceModel model;
  EmbeddingLoss loss;
  std::vector<std::string> speakers;
  nn::TrainLog log;
};

// Batches of speakers_per_batch speakers x chunks_per_speaker chunks of
// spec.chunk_duration (spec.batch_size is not used).
TrainedEmbedding train_embedding(std::span<const SpeakerFile> files,
                                 const EmbeddingOptions &opt,
                                 const nn::ArchSpec &arch,
                                 const nn::TrainSpec &spec,
                                 const nn::EpochCallback &on_epoch = {});

// ---------------------------------------------------------------------------
// Verification trials.

struct Trial {
  bool target = false;
  std::string wav_a;
  double start_a = 0.0, duration_a = 0.0;
  std::string wav_b;
  double start_b = 0.0, duration_b = 0.0;
};

// `<label 0|1> <wav_a> <start_a> <dur_a> <wav_b> <start_b> <dur_b>`.
std::vector<Trial> parse_trials(const std::string &text,
                                const std::string &source = "<string>");
std::vector<Trial> read_trials(const std::filesystem::path &path);
std::string format_trials(const std::vector<Trial> &trials);
void write_trials(const std::filesystem::path &path,
                  const std::vector<Trial> &trials);

struct TrialSource {
  std::string wav;
  Annotation reference;
};

// Half target, half non-target pairs of `duration` seconds taken inside
// single-speaker regions.
std::vector<Trial> generate_trials(std::span<const TrialSource> sources,
                                   int count, double duration,
                                   unsigned long long seed);

struct VerificationResult {
  std::vector<double> scores;  // cosine similarity per trial
  double eer = 0.0;
};

// Features are extracted and normalised per WAV file; each side of a trial
// is embedded with embed_span().
VerificationResult verify_trials(const nn::SequenceModel &model,
                                 const std::vector<Trial> &trials,
                                 const MfccConfig &mfcc, long chunk_frames);

}  // namespace diarkit
