#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "diarkit/error.hpp"
#include "diarkit/pipeline.hpp"

namespace diarkit {

namespace {

struct ParamRef {
  const char *name;
  double Hyperparameters::*member;
};

constexpr ParamRef kParams[] = {
    {"vad_threshold", &Hyperparameters::vad_threshold},
    {"scd_threshold", &Hyperparameters::scd_threshold},
    {"cluster_threshold", &Hyperparameters::cluster_threshold},
    {"min_duration_on", &Hyperparameters::min_duration_on},
    {"min_duration_off", &Hyperparameters::min_duration_off},
    {"osd_threshold", &Hyperparameters::osd_threshold},
};

double Hyperparameters::*member_of(const std::string &name) {
  for (const auto &p : kParams) {
    if (name == p.name) return p.member;
  }
  throw ValidationError("unknown hyperparameter '" + name + "'");
}

void expect_task(const TaskModel &m, const std::string &task,
                 const std::filesystem::path &path) {
  if (m.config.task != task) {
    throw ValidationError(path.string() + ": expected a " + task +
                          " model, found " + m.config.task);
  }
}

}  // namespace

const std::vector<std::string> &hyperparameter_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto &p : kParams) n.push_back(p.name);
    return n;
  }();
  return names;
}

double get_param(const Hyperparameters &h, const std::string &name) {
  return h.*member_of(name);
}

void set_param(Hyperparameters &h, const std::string &name, double value) {
  h.*member_of(name) = value;
}

void HyperparameterSpace::validate() const {
  if (params.empty()) throw ValidationError("hyperparameter space is empty");
  std::set<std::string> seen;
  for (const auto &b : params) {
    member_of(b.name);
    if (!seen.insert(b.name).second) {
      throw ValidationError("hyperparameter '" + b.name + "' listed twice");
    }
    if (!(b.min < b.max)) {
      throw ValidationError("hyperparameter '" + b.name + "': need min < max");
    }
  }
}

bool HyperparameterSpace::contains(const Hyperparameters &h) const {
  return std::all_of(params.begin(), params.end(), [&](const ParamBound &b) {
    const double v = get_param(h, b.name);
    return v >= b.min && v <= b.max;
  });
}

HyperparameterSpace default_space(bool with_osd) {
  HyperparameterSpace s;
  s.params = {{"vad_threshold", 0.05, 0.95},
              {"scd_threshold", 0.05, 0.95},
              {"cluster_threshold", 0.05, 1.5},
              {"min_duration_on", 0.0, 0.5},
              {"min_duration_off", 0.0, 0.5}};
  if (with_osd) s.params.push_back({"osd_threshold", 0.05, 0.95});
  return s;
}

void PipelineConfig::validate() const {
  if (vad.empty() || scd.empty() || embedding.empty()) {
    throw ValidationError("pipeline: vad, scd and embedding models are required");
  }
  if (overlap_aware && (!resegment || osd.empty())) {
    throw ValidationError(
        "pipeline: overlap-aware re-segmentation needs resegmentation and an osd model");
  }
  if (!(scd_min_gap >= 0.0) || !(collar >= 0.0)) {
    throw ValidationError("pipeline: scd_min_gap and collar must be >= 0");
  }
  if (budget < 1) throw ValidationError("pipeline: tuner budget must be >= 1");
  if (workers < 1) throw ValidationError("pipeline: workers must be >= 1");
  if (reseg.epochs < 1) throw ValidationError("pipeline: resegmentation epochs must be >= 1");
  space.validate();
}

PipelineConfig pipeline_config_from_json(const json &j,
                                         const std::filesystem::path &base) {
  if (!j.is_object()) throw ValidationError("pipeline config: expected an object");
  static const std::set<std::string> known = {
      "models", "scd_min_gap", "collar", "resegmentation", "space", "defaults", "tuner"};
  for (const auto &[k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError("pipeline config: unknown key '" + k + "'");
  }
  PipelineConfig c;
  auto resolve = [&](const json &v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  try {
    const json &m = j.at("models");
    for (const auto &[k, v] : m.items()) {
      if (k == "vad") c.vad = resolve(v);
      else if (k == "scd") c.scd = resolve(v);
      else if (k == "embedding") c.embedding = resolve(v);
      else if (k == "osd") c.osd = resolve(v);
      else throw ValidationError("pipeline config: unknown model '" + k + "'");
    }
    if (j.contains("scd_min_gap")) c.scd_min_gap = j.at("scd_min_gap").get<double>();
    if (j.contains("collar")) c.collar = j.at("collar").get<double>();
    if (j.contains("resegmentation")) {
      const json &r = j.at("resegmentation");
      for (const auto &[k, v] : r.items()) {
        if (k == "enabled") c.resegment = v.get<bool>();
        else if (k == "overlap_aware") c.overlap_aware = v.get<bool>();
        else if (k == "epochs") c.reseg.epochs = v.get<int>();
        else if (k == "arch") c.reseg.arch = arch_from_json(v, c.reseg.arch);
        else if (k == "train") c.reseg.train = train_spec_from_json(v, c.reseg.train);
        else throw ValidationError("resegmentation: unknown key '" + k + "'");
      }
    }
    if (j.contains("space")) {
      c.space.params.clear();
      for (const auto &[k, v] : j.at("space").items()) {
        if (!v.is_array() || v.size() != 2) {
          throw ValidationError("space." + k + ": expected [min, max]");
        }
        c.space.params.push_back({k, v[0].get<double>(), v[1].get<double>()});
      }
    } else if (!c.osd.empty() && c.overlap_aware) {
      c.space = default_space(true);
    }
    if (j.contains("defaults")) {
      for (const auto &[k, v] : j.at("defaults").items()) {
        set_param(c.defaults, k, v.get<double>());
      }
    }
    if (j.contains("tuner")) {
      for (const auto &[k, v] : j.at("tuner").items()) {
        if (k == "budget") c.budget = v.get<int>();
        else if (k == "seed") c.seed = v.get<unsigned long long>();
        else if (k == "workers") c.workers = v.get<int>();
        else throw ValidationError("tuner: unknown key '" + k + "'");
      }
    }
  } catch (const json::exception &e) {
    throw ValidationError(std::string("pipeline config: ") + e.what());
  }
  c.reseg.overlap_aware = c.overlap_aware;
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path) {
  return pipeline_config_from_json(read_json(path), path.parent_path());
}

long PipelineModels::embedding_chunk_frames() const {
  const TaskConfig &c = embedding.config;
  return std::max(1L, std::lround(c.train.chunk_duration / c.mfcc.step));
}

PipelineModels load_models(const PipelineConfig &c) {
  PipelineModels m{load_task_model(c.vad), load_task_model(c.scd),
                   load_task_model(c.embedding), std::nullopt};
  expect_task(m.vad, "vad", c.vad);
  expect_task(m.scd, "scd", c.scd);
  expect_task(m.embedding, "embedding", c.embedding);
  if (!c.osd.empty()) {
    m.osd = load_task_model(c.osd);
    expect_task(*m.osd, "osd", c.osd);
  }
  const MfccConfig &f = m.vad.config.mfcc;
  if (!(m.scd.config.mfcc == f) || !(m.embedding.config.mfcc == f) ||
      (m.osd && !(m.osd->config.mfcc == f))) {
    throw ValidationError("pipeline: all models must use the same MFCC settings");
  }
  return m;
}

PreparedFile::PreparedFile(const PipelineModels &models, const CorpusFile &file)
    : uri_(file.uri), reference_(file.reference), uem_(file.uem) {
  if (file.waveform.samples.empty()) {
    throw ValidationError(file.uri + ": empty audio");
  }
  features_ = normalized_mfcc(file.waveform, models.mfcc());
  vad_ = score_features(models.vad, features_);
  scd_ = score_features(models.scd, features_);
  if (models.osd) osd_ = score_features(*models.osd, features_);
}

Eigen::RowVectorXd PreparedFile::span_embedding(const PipelineModels &models,
                                                long first, long n) const {
  const std::pair<long, long> key{first, n};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Eigen::RowVectorXd e = embed_span(models.embedding.model, features_.data, first,
                                    n, models.embedding_chunk_frames());
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(e)).first->second;
}

Timeline speech_turns(const PreparedFile &f, const Hyperparameters &h,
                      double scd_min_gap) {
  const Timeline speech = binarize(
      f.vad_scores(), 1, {h.vad_threshold, h.min_duration_on, h.min_duration_off});
  const SlidingWindowFeature &scd = f.scd_scores();
  const std::vector<double> peaks =
      peak_pick(column(scd, 1), scd.geometry, {h.scd_threshold, scd_min_gap});
  return split_at(speech, peaks);
}

Annotation run_pipeline(const PipelineModels &models, const PipelineConfig &c,
                        const Hyperparameters &h, const PreparedFile &f) {
  Annotation hyp(f.uri());
  const Timeline turns = speech_turns(f, h, c.scd_min_gap);
  if (turns.empty()) return hyp;

  std::vector<Eigen::RowVectorXd> emb;
  emb.reserve(turns.size());
  const SlidingWindowFeature &x = f.features();
  for (const auto &t : turns) {
    const auto [first, n] = frames_of(t, x.geometry, x.frames());
    emb.push_back(f.span_embedding(models, first, n));
  }
  const std::vector<int> labels = agglomerate(cosine_distances(emb), h.cluster_threshold);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    hyp.add(turns[i], "S" + std::to_string(labels[i]));
  }
  if (!c.resegment) return hyp;

  ResegSpec spec = c.reseg;
  spec.overlap_aware = c.overlap_aware;
  Timeline overlap;
  if (c.overlap_aware) {
    if (!f.osd_scores()) throw ValidationError("overlap-aware re-segmentation needs osd scores");
    overlap = binarize(*f.osd_scores(), 1,
                       {h.osd_threshold, h.min_duration_on, h.min_duration_off});
  }
  return resegment(f.uri(), x, hyp, spec, overlap);
}

DiarizationError pipeline_der(const PipelineModels &models,
                              const PipelineConfig &c, const Hyperparameters &h,
                              std::span<const PreparedFile *const> files) {
  PipelineConfig plain = c;
  plain.resegment = false;
  plain.overlap_aware = false;
  DiarizationError total;
  for (const PreparedFile *f : files) {
    total += der(f->reference(), run_pipeline(models, plain, h, *f), f->uem(), c.collar);
  }
  return total;
}

Evaluation evaluate(const PipelineModels &models, const PipelineConfig &c,
                    const TunedParams &params,
                    std::span<const PreparedFile *const> test) {
  if (test.empty()) throw ValidationError("evaluation set is empty");
  const std::set<std::string> dev(params.dev_uris.begin(), params.dev_uris.end());
  for (const PreparedFile *f : test) {
    if (dev.count(f->uri())) {
      throw ValidationError("split violation: " + f->uri() +
                            " was used to tune the parameters");
    }
  }

  std::vector<Annotation> hyps(test.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < test.size();) {
      try {
        hyps[i] = run_pipeline(models, c, params.params, *test[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(c.workers, static_cast<int>(test.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  Evaluation out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const PreparedFile &f = *test[i];
    const DiarizationError e = der(f.reference(), hyps[i], f.uem(), c.collar);
    out.hypotheses[f.uri()] = hyps[i];
    out.per_file[f.uri()] = e;
    out.total += e;
    if (e.total > 0.0) {
      out.report.push_back({f.uri(), "der", e.rate()});
      out.report.push_back({f.uri(), "false_alarm", e.false_alarm / e.total});
      out.report.push_back({f.uri(), "miss", e.miss / e.total});
      out.report.push_back({f.uri(), "confusion", e.confusion / e.total});
    }
  }
  const DiarizationError &t = out.total;
  out.report.push_back({"TOTAL", "der", t.rate()});
  out.report.push_back({"TOTAL", "false_alarm", t.false_alarm / t.total});
  out.report.push_back({"TOTAL", "miss", t.miss / t.total});
  out.report.push_back({"TOTAL", "confusion", t.confusion / t.total});
  return out;
}

}  // namespace diarkit
