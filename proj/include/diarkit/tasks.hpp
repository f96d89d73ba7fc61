#pragma once

// Training, scoring and validation of the individual blocks on a protocol.

#include <filesystem>
#include <string>
#include <vector>

#include "diarkit/config.hpp"
#include "diarkit/corpus.hpp"
#include "diarkit/metrics.hpp"

namespace diarkit {

struct TaskModel {
  nn::SequenceModel model;
  TaskConfig config;
};

// Checkpoint metadata holds {"task": ..., "config": ...}.
void save_task_model(const std::filesystem::path &path, const TaskModel &m);
TaskModel load_task_model(const std::filesystem::path &path);

struct TrainOutcome {
  TaskModel model;
  nn::TrainLog log;
};

// Trains on the protocol's train split. A noise augmentation without its
// own noise_dir uses the protocol's.
TrainOutcome train_task(const TaskConfig &config, const ProtocolSpec &protocol,
                        const nn::EpochCallback &on_epoch = {});

// Sliding-window scores over a whole file, windows as long as the training
// chunks.
SlidingWindowFeature score_features(const TaskModel &m,
                                    const SlidingWindowFeature &features);

// Regions where at least two labels are active.
Timeline overlapped_speech(const Annotation &ref);

DetectionError vad_error(const SlidingWindowFeature &scores,
                         const Annotation &ref, const Timeline &uem,
                         const BinarizeParams &p);
// Reference speech (within uem) cut at the detected change points, compared
// with the reference turns.
PurityCoverage scd_segmentation(const SlidingWindowFeature &scores,
                                const Annotation &ref, const Timeline &uem,
                                const PeakParams &p);
PrecisionRecall osd_precision_recall(const SlidingWindowFeature &scores,
                                     const Annotation &ref, const Timeline &uem,
                                     const BinarizeParams &p);

// One metric value per line: `<uri> <metric> <value>`; aggregates use the
// uri "TOTAL".
struct ReportLine {
  std::string uri;
  std::string metric;
  double value = 0.0;
};
using Report = std::vector<ReportLine>;
std::string format_report(const Report &r);
// Aligned text table, rates in percent.
std::string format_table(const Report &r);

// Thresholds swept when validating speaker change detection.
std::vector<double> scd_threshold_grid();

// VAD: detection error at the configured threshold. SCD: purity/coverage
// over scd_threshold_grid(). OSD: precision/recall. Embedding: EER on
// trials generated from `files` with `seed`.
Report validate_task(const TaskModel &m, const std::vector<CorpusFile> &files,
                     unsigned long long seed = 0);

}  // namespace diarkit
