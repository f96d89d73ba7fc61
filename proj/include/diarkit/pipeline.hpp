#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diarkit/clustering.hpp"
#include "diarkit/tasks.hpp"

namespace diarkit {

// Hyperparameters of the diarization pipeline.
struct Hyperparameters {
  double vad_threshold = 0.5;
  double scd_threshold = 0.5;
  double cluster_threshold = 0.5;
  double min_duration_on = 0.1;
  double min_duration_off = 0.1;
  double osd_threshold = 0.5;

  friend bool operator==(const Hyperparameters &, const Hyperparameters &) = default;
};

const std::vector<std::string> &hyperparameter_names();
// Throws ValidationError on an unknown name.
double get_param(const Hyperparameters &h, const std::string &name);
void set_param(Hyperparameters &h, const std::string &name, double value);

struct ParamBound {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

struct HyperparameterSpace {
  std::vector<ParamBound> params;

  void validate() const;  // min < max, unique known names
  bool contains(const Hyperparameters &h) const;
};

// vad_threshold, scd_threshold, cluster_threshold, min_duration_on and
// min_duration_off (plus osd_threshold when `with_osd`).
HyperparameterSpace default_space(bool with_osd = false);

struct PipelineConfig {
  std::filesystem::path vad, scd, embedding, osd;  // checkpoints; osd optional
  double scd_min_gap = 0.2;
  double collar = 0.0;
  bool resegment = false;
  bool overlap_aware = false;  // needs the osd model
  ResegSpec reseg;
  HyperparameterSpace space = default_space();
  Hyperparameters defaults;  // values of the parameters not searched
  int budget = 50;
  unsigned long long seed = 0;
  int workers = 1;

  void validate() const;
};

// {"models": {"vad", "scd", "embedding", "osd"}, "scd_min_gap", "collar",
//  "resegmentation": {"enabled", "overlap_aware", "epochs", "arch", "train"},
//  "space": {"<name>": [min, max], ...}, "defaults": {"<name>": value},
//  "tuner": {"budget", "seed", "workers"}}
// Relative model paths are resolved against the config's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path &path);
PipelineConfig pipeline_config_from_json(const json &j,
                                         const std::filesystem::path &base);

struct PipelineModels {
  TaskModel vad, scd, embedding;
  std::optional<TaskModel> osd;

  const MfccConfig &mfcc() const { return vad.config.mfcc; }
  long embedding_chunk_frames() const;
};

PipelineModels load_models(const PipelineConfig &c);

// Everything about a file that does not depend on the hyperparameters.
class PreparedFile {
 public:
  PreparedFile(const PipelineModels &models, const CorpusFile &file);

  const std::string &uri() const { return uri_; }
  const SlidingWindowFeature &features() const { return features_; }
  const SlidingWindowFeature &vad_scores() const { return vad_; }
  const SlidingWindowFeature &scd_scores() const { return scd_; }
  const SlidingWindowFeature *osd_scores() const {
    return osd_.frames() > 0 ? &osd_ : nullptr;
  }
  const Annotation &reference() const { return reference_; }
  const Timeline &uem() const { return uem_; }

  // Memoised embed_span over [first, first + n). Thread-safe.
  Eigen::RowVectorXd span_embedding(const PipelineModels &models, long first,
                                    long n) const;

 private:
  std::string uri_;
  SlidingWindowFeature features_, vad_, scd_, osd_;
  Annotation reference_;
  Timeline uem_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<long, long>, Eigen::RowVectorXd> cache_;
};

// Speech turns: VAD regions cut at the detected speaker changes.
Timeline speech_turns(const PreparedFile &f, const Hyperparameters &h,
                      double scd_min_gap);

// VAD -> SCD -> turn embeddings -> clustering, then optional
// re-segmentation (overlap-aware when configured).
Annotation run_pipeline(const PipelineModels &models, const PipelineConfig &c,
                        const Hyperparameters &h, const PreparedFile &f);

// Pooled DER over the files (no re-segmentation).
DiarizationError pipeline_der(const PipelineModels &models,
                              const PipelineConfig &c, const Hyperparameters &h,
                              std::span<const PreparedFile *const> files);

// ---------------------------------------------------------------------------
// Tuning.

struct TuneTrial {
  int index = 0;
  std::string phase;  // "random" or "refine"
  Hyperparameters params;
  double objective = 0.0;
  unsigned long long seed = 0;
};

struct TuneResult {
  TuneTrial best;
  std::vector<TuneTrial> history;
};

using TuneObjective = std::function<double(const Hyperparameters &)>;

// Seeded random search over the box for round(0.8 budget) trials (at least
// one), then coordinate-wise golden-section search around the incumbent
// for the remaining evaluations. Parameters outside the space keep their
// value in `base`. Random-phase trials run on `workers` threads; the
// incumbent is updated in trial order (earliest wins ties).
TuneResult tune(const HyperparameterSpace &space, const TuneObjective &objective,
                int budget, unsigned long long seed,
                const Hyperparameters &base = {}, int workers = 1);

// Uniform point of the box (coordinates not in the space come from `base`).
Hyperparameters sample_point(const HyperparameterSpace &space,
                             const Hyperparameters &base, std::mt19937_64 &rng);

// Joint tuning of the pipeline on dev-set DER.
TuneResult tune_pipeline(const PipelineModels &models, const PipelineConfig &c,
                         std::span<const PreparedFile *const> dev);

// Baseline: vad_threshold on detection error, then scd_threshold on the
// purity/coverage F-measure, then cluster_threshold on DER, each with a
// third of the budget.
TuneResult tune_independently(const PipelineModels &models,
                              const PipelineConfig &c,
                              std::span<const PreparedFile *const> dev);

// Tuned parameters plus the dev uris they were tuned on.
struct TunedParams {
  Hyperparameters params;
  std::vector<std::string> dev_uris;
  double dev_der = 0.0;
  unsigned long long seed = 0;
  int budget = 0;
};
void save_params(const std::filesystem::path &path, const TunedParams &p);
TunedParams load_params(const std::filesystem::path &path);

std::string format_history(const std::vector<TuneTrial> &history);

struct Evaluation {
  std::map<std::string, Annotation> hypotheses;
  std::map<std::string, DiarizationError> per_file;
  DiarizationError total;
  Report report;
};

// Refuses (ValidationError) test files whose uri was used for tuning.
Evaluation evaluate(const PipelineModels &models, const PipelineConfig &c,
                    const TunedParams &params,
                    std::span<const PreparedFile *const> test);

}  // namespace diarkit
