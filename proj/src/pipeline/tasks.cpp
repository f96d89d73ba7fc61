#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "diarkit/error.hpp"
#include "diarkit/tasks.hpp"

namespace diarkit {

void save_task_model(const std::filesystem::path &path, const TaskModel &m) {
  const json meta = {{"task", m.config.task}, {"config", to_json(m.config)}};
  nn::save_checkpoint(path, m.model, meta.dump());
}

TaskModel load_task_model(const std::filesystem::path &path) {
  nn::Checkpoint c = nn::load_checkpoint(path);
  const json meta = parse_json(c.metadata_json, path.string());
  if (!meta.contains("task") || !meta.contains("config")) {
    throw ValidationError(path.string() + ": checkpoint has no task metadata");
  }
  TaskModel m;
  m.config = task_config_from_json(meta.at("task").get<std::string>(),
                                   meta.at("config"));
  if (!(m.config.arch == c.model.arch())) {
    throw ValidationError(path.string() + ": metadata does not match the model");
  }
  m.model = std::move(c.model);
  return m;
}

TrainOutcome train_task(const TaskConfig &config, const ProtocolSpec &protocol,
                        const nn::EpochCallback &on_epoch) {
  const std::vector<CorpusFile> files = load_split(protocol, "train");
  TrainOutcome out;
  out.model.config = config;
  if (config.task == "embedding") {
    std::vector<SpeakerFile> data;
    for (const auto &f : files) {
      data.push_back({f.uri, normalized_mfcc(f.waveform, config.mfcc), f.reference});
    }
    TrainedEmbedding t =
        train_embedding(data, config.embedding, config.arch, config.train, on_epoch);
    out.model.model = std::move(t.model);
    out.log = std::move(t.log);
    return out;
  }

  LabelingOptions opt;
  opt.task = task_from_string(config.task);
  opt.scd = config.scd;
  opt.mfcc = config.mfcc;
  opt.augment = config.augment;
  if (opt.augment.noise_dir.empty() && opt.augment.noise_probability > 0.0) {
    if (protocol.noise_dir.empty()) {
      throw ValidationError("noise augmentation requested but no noise_dir given");
    }
    opt.augment.noise_dir = protocol.noise_dir.string();
  }
  opt.class_weights = config.class_weights;
  std::vector<LabeledFile> data;
  for (const auto &f : files) {
    data.push_back(make_labeled_file(f.uri, f.waveform, f.reference, opt));
  }
  TrainedLabeler t = train_labeler(data, opt, config.arch, config.train, on_epoch);
  out.model.model = std::move(t.model);
  out.log = std::move(t.log);
  return out;
}

SlidingWindowFeature score_features(const TaskModel &m,
                                    const SlidingWindowFeature &features) {
  return nn::apply_sliding(
      m.model, features,
      nn::sliding_spec(m.config.train.chunk_duration, features.geometry));
}

Timeline overlapped_speech(const Annotation &ref) {
  const auto labels = ref.labels();
  std::vector<Timeline> tl;
  for (const auto &l : labels) tl.push_back(ref.label_timeline(l).support());
  Timeline out;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    for (std::size_t j = i + 1; j < tl.size(); ++j) {
      out = union_of(out, intersection(tl[i], tl[j]));
    }
  }
  return out;
}

DetectionError vad_error(const SlidingWindowFeature &scores,
                         const Annotation &ref, const Timeline &uem,
                         const BinarizeParams &p) {
  return detection_error(ref, binarize(scores, 1, p), uem);
}

PurityCoverage scd_segmentation(const SlidingWindowFeature &scores,
                                const Annotation &ref, const Timeline &uem,
                                const PeakParams &p) {
  const std::vector<double> peaks = peak_pick(column(scores, 1), scores.geometry, p);
  const Timeline region = uem.empty() ? ref.speech() : intersection(ref.speech(), uem);
  Annotation turns(ref.uri());
  int k = 0;
  for (const auto &s : split_at(region, peaks)) {
    turns.add(s, "seg" + std::to_string(k++));
  }
  return purity_coverage(ref, turns, uem);
}

PrecisionRecall osd_precision_recall(const SlidingWindowFeature &scores,
                                     const Annotation &ref, const Timeline &uem,
                                     const BinarizeParams &p) {
  return precision_recall(overlapped_speech(ref), binarize(scores, 1, p), uem);
}

std::string format_report(const Report &r) {
  std::string out;
  char buf[64];
  for (const auto &line : r) {
    std::snprintf(buf, sizeof buf, " %.17g\n", line.value);
    out += line.uri + " " + line.metric + buf;
  }
  return out;
}

std::string format_table(const Report &r) {
  std::vector<std::string> uris, metrics;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto &line : r) {
    if (std::find(uris.begin(), uris.end(), line.uri) == uris.end()) {
      uris.push_back(line.uri);
    }
    if (std::find(metrics.begin(), metrics.end(), line.metric) == metrics.end()) {
      metrics.push_back(line.metric);
    }
    cell[{line.uri, line.metric}] = line.value;
  }
  std::size_t width = 4;
  for (const auto &u : uris) width = std::max(width, u.size());
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), "uri");
  out += buf;
  for (const auto &m : metrics) {
    const bool seconds = m.rfind("duration", 0) == 0;
    std::snprintf(buf, sizeof buf, " %14s", (m + (seconds ? " (s)" : " %")).c_str());
    out += buf;
  }
  out += "\n";
  for (const auto &u : uris) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), u.c_str());
    out += buf;
    for (const auto &m : metrics) {
      auto it = cell.find({u, m});
      if (it == cell.end()) {
        std::snprintf(buf, sizeof buf, " %14s", "-");
      } else {
        const bool seconds = m.rfind("duration", 0) == 0;
        std::snprintf(buf, sizeof buf, " %14.2f",
                      seconds ? it->second : 100.0 * it->second);
      }
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<double> scd_threshold_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 9; ++i) g.push_back(0.1 * i);
  return g;
}

Report validate_task(const TaskModel &m, const std::vector<CorpusFile> &files,
                     unsigned long long seed) {
  if (files.empty()) throw ValidationError("validation set is empty");
  const TaskConfig &c = m.config;
  Report r;
  if (c.task == "embedding") {
    std::vector<TrialSource> sources;
    for (const auto &f : files) sources.push_back({f.wav_path.string(), f.reference});
    const auto trials = generate_trials(sources, c.trials, c.trial_duration, seed);
    const long chunk = std::max(1L, std::lround(c.train.chunk_duration / c.mfcc.step));
    r.push_back({"TOTAL", "eer", verify_trials(m.model, trials, c.mfcc, chunk).eer});
    return r;
  }

  std::vector<SlidingWindowFeature> scores;
  for (const auto &f : files) {
    scores.push_back(score_features(m, normalized_mfcc(f.waveform, c.mfcc)));
  }
  if (c.task == "vad") {
    DetectionError total;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const DetectionError e =
          vad_error(scores[i], files[i].reference, files[i].uem, c.binarize);
      total += e;
      if (e.total > 0.0) {
        r.push_back({files[i].uri, "detection_error", e.rate()});
        r.push_back({files[i].uri, "false_alarm", e.fa_rate()});
        r.push_back({files[i].uri, "miss", e.miss_rate()});
      }
    }
    r.push_back({"TOTAL", "detection_error", total.rate()});
    r.push_back({"TOTAL", "false_alarm", total.fa_rate()});
    r.push_back({"TOTAL", "miss", total.miss_rate()});
  } else if (c.task == "scd") {
    for (double theta : scd_threshold_grid()) {
      PurityCoverage total;
      for (std::size_t i = 0; i < files.size(); ++i) {
        total += scd_segmentation(scores[i], files[i].reference, files[i].uem,
                                  {theta, c.peak_min_gap});
      }
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "@%.1f", theta);
      r.push_back({"TOTAL", std::string("purity") + suffix, total.purity()});
      r.push_back({"TOTAL", std::string("coverage") + suffix, total.coverage()});
    }
  } else {
    PrecisionRecall total;
    for (std::size_t i = 0; i < files.size(); ++i) {
      total += osd_precision_recall(scores[i], files[i].reference, files[i].uem,
                                    c.binarize);
    }
    if (total.has_precision()) r.push_back({"TOTAL", "precision", total.precision()});
    r.push_back({"TOTAL", "recall", total.recall()});
  }
  return r;
}

}  // namespace diarkit
