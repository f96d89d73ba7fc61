#pragma once

// JSON (de)serialisation of the settings structs. Readers start from the
// given defaults, override the keys present and reject unknown keys with
// ValidationError.

#include <json.hpp>
#include <string>
#include <vector>

#include "diarkit/embedding.hpp"
#include "diarkit/features.hpp"
#include "diarkit/labeling.hpp"
#include "diarkit/nnet.hpp"

namespace diarkit {

using nlohmann::json;

json to_json(const nn::ArchSpec &a);
json to_json(const nn::TrainSpec &t);
json to_json(const MfccConfig &m);
json to_json(const AugmentSpec &a);
json to_json(const LossSpec &l);

nn::ArchSpec arch_from_json(const json &j, nn::ArchSpec base = {});
nn::TrainSpec train_spec_from_json(const json &j, nn::TrainSpec base = {});
MfccConfig mfcc_from_json(const json &j, MfccConfig base = {});
AugmentSpec augment_from_json(const json &j, AugmentSpec base = {});
LossSpec loss_spec_from_json(const json &j, LossSpec base = {});

// Parses text, wrapping syntax errors in ValidationError.
json parse_json(const std::string &text, const std::string &source);
json read_json(const std::filesystem::path &path);

// Everything needed to train and validate one model.
struct TaskConfig {
  std::string task = "vad";  // vad | scd | osd | embedding
  nn::ArchSpec arch;
  nn::TrainSpec train;
  MfccConfig mfcc;
  AugmentSpec augment;
  ScdSpec scd;
  std::vector<double> class_weights;
  EmbeddingOptions embedding;
  // Validation of embeddings on generated trials.
  int trials = 400;
  double trial_duration = 1.0;
  // Post-processing used when validating or applying labelling models.
  BinarizeParams binarize;
  double peak_min_gap = 0.2;
};

// Desk-scale defaults per task (embedding: stats pooling, 0.5 s chunks).
TaskConfig default_task_config(const std::string &task);
// {"arch", "train", "mfcc", "augment", "scd", "class_weights", "loss",
//  "batch": {"speakers", "chunks"}, "validation": {"trials",
//  "trial_duration", "threshold", "min_duration_on", "min_duration_off",
//  "peak_min_gap"}}
TaskConfig task_config_from_json(const std::string &task, const json &j);
json to_json(const TaskConfig &c);

}  // namespace diarkit
