#include <fstream>
#include <set>
#include <sstream>

#include "diarkit/config.hpp"
#include "diarkit/error.hpp"

namespace diarkit {

namespace {

class Reader {
 public:
  Reader(const json &j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j_.is_object()) throw ValidationError(ctx_ + ": expected an object");
  }

  template <typename T>
  void get(const char *key, T &out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception &e) {
      throw ValidationError(ctx_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char *key, T &out, Parse parse) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument &e) {
      throw ValidationError(ctx_ + "." + key + ": " + e.what());
    }
  }

  const json *sub(const char *key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto &[key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ValidationError(ctx_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  const json &j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

template <typename F>
void checked(const std::string &ctx, F f) {
  try {
    f();
  } catch (const ValidationError &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw ValidationError(ctx + ": " + e.what());
  }
}

}  // namespace

json parse_json(const std::string &text, const std::string &source) {
  try {
    return json::parse(text);
  } catch (const json::exception &e) {
    throw ValidationError(source + ": " + e.what());
  }
}

json read_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

json to_json(const nn::ArchSpec &a) {
  return {{"input_dim", a.input_dim},
          {"recurrent_layers", a.recurrent_layers},
          {"recurrent_units", a.recurrent_units},
          {"cell", nn::to_string(a.cell)},
          {"pooling", nn::to_string(a.pooling)},
          {"ff_layers", a.ff_layers},
          {"output_dim", a.output_dim},
          {"head", nn::to_string(a.head)}};
}

nn::ArchSpec arch_from_json(const json &j, nn::ArchSpec a) {
  Reader r(j, "arch");
  r.get("input_dim", a.input_dim);
  r.get("recurrent_layers", a.recurrent_layers);
  r.get("recurrent_units", a.recurrent_units);
  r.get_enum("cell", a.cell, nn::cell_from_string);
  r.get_enum("pooling", a.pooling, nn::pooling_from_string);
  r.get("ff_layers", a.ff_layers);
  r.get("output_dim", a.output_dim);
  r.get_enum("head", a.head, nn::head_from_string);
  r.finish();
  checked("arch", [&] { a.validate(); });
  return a;
}

json to_json(const nn::TrainSpec &t) {
  return {{"chunk_duration", t.chunk_duration},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"optimizer", nn::to_string(t.optimizer)},
          {"lr", t.lr},
          {"clip_norm", t.clip_norm},
          {"seed", t.rng_seed},
          {"batches_per_epoch", t.batches_per_epoch}};
}

nn::TrainSpec train_spec_from_json(const json &j, nn::TrainSpec t) {
  Reader r(j, "train");
  r.get("chunk_duration", t.chunk_duration);
  r.get("batch_size", t.batch_size);
  r.get("epochs", t.epochs);
  r.get_enum("optimizer", t.optimizer, nn::optimizer_from_string);
  r.get("lr", t.lr);
  r.get("clip_norm", t.clip_norm);
  r.get("seed", t.rng_seed);
  r.get("batches_per_epoch", t.batches_per_epoch);
  r.finish();
  checked("train", [&] { t.validate(); });
  return t;
}

json to_json(const MfccConfig &m) {
  return {{"sample_rate", m.sample_rate}, {"window", m.window},
          {"step", m.step},               {"n_fft", m.n_fft},
          {"n_mels", m.n_mels},           {"fmin", m.fmin},
          {"fmax", m.fmax},               {"n_ceps", m.n_ceps},
          {"include_c0", m.include_c0},   {"preemphasis", m.preemphasis},
          {"delta_order", m.delta_order}, {"delta_window", m.delta_window}};
}

MfccConfig mfcc_from_json(const json &j, MfccConfig m) {
  Reader r(j, "mfcc");
  r.get("sample_rate", m.sample_rate);
  r.get("window", m.window);
  r.get("step", m.step);
  r.get("n_fft", m.n_fft);
  r.get("n_mels", m.n_mels);
  r.get("fmin", m.fmin);
  r.get("fmax", m.fmax);
  r.get("n_ceps", m.n_ceps);
  r.get("include_c0", m.include_c0);
  r.get("preemphasis", m.preemphasis);
  r.get("delta_order", m.delta_order);
  r.get("delta_window", m.delta_window);
  r.finish();
  if (m.sample_rate <= 0 || !(m.window > 0) || !(m.step > 0) || m.n_ceps < 1 ||
      m.n_mels < m.n_ceps + (m.include_c0 ? 0 : 1) || m.delta_order < 0 ||
      m.delta_order > 2 || m.delta_window < 1 || m.window_samples() > m.n_fft) {
    throw ValidationError("mfcc: inconsistent settings");
  }
  return m;
}

json to_json(const AugmentSpec &a) {
  return {{"noise_dir", a.noise_dir},
          {"noise_probability", a.noise_probability},
          {"snr_min", a.snr_min},
          {"snr_max", a.snr_max},
          {"overlap_probability", a.overlap_probability},
          {"overlap_snr_min", a.overlap_snr_min},
          {"overlap_snr_max", a.overlap_snr_max},
          {"seed", a.rng_seed}};
}

AugmentSpec augment_from_json(const json &j, AugmentSpec a) {
  Reader r(j, "augment");
  r.get("noise_dir", a.noise_dir);
  r.get("noise_probability", a.noise_probability);
  r.get("snr_min", a.snr_min);
  r.get("snr_max", a.snr_max);
  r.get("overlap_probability", a.overlap_probability);
  r.get("overlap_snr_min", a.overlap_snr_min);
  r.get("overlap_snr_max", a.overlap_snr_max);
  r.get("seed", a.rng_seed);
  r.finish();
  a.validate();
  return a;
}

json to_json(const LossSpec &l) {
  return {{"kind", to_string(l.kind)},
          {"margin", l.margin},
          {"scale", l.scale},
          {"center_weight", l.center_weight},
          {"center_momentum", l.center_momentum}};
}

LossSpec loss_spec_from_json(const json &j, LossSpec l) {
  Reader r(j, "loss");
  r.get_enum("kind", l.kind, loss_from_string);
  r.get("margin", l.margin);
  r.get("scale", l.scale);
  r.get("center_weight", l.center_weight);
  r.get("center_momentum", l.center_momentum);
  r.finish();
  checked("loss", [&] { l.validate(); });
  return l;
}

TaskConfig default_task_config(const std::string &task) {
  TaskConfig c;
  c.task = task;
  if (task == "vad" || task == "scd" || task == "osd") {
    c.arch = {57, 1, 32, nn::Cell::lstm, nn::Pooling::none, {32}, 2,
              nn::Head::softmax};
    c.train.chunk_duration = 2.0;
    if (task == "osd") c.augment.overlap_probability = 0.5;
  } else if (task == "embedding") {
    c.arch = {57, 1, 32, nn::Cell::lstm, nn::Pooling::stats, {32}, 32,
              nn::Head::embedding};
    c.train.chunk_duration = 0.5;
  } else {
    throw ValidationError("unknown task '" + task + "'");
  }
  c.arch.input_dim = c.mfcc.dims();
  return c;
}

TaskConfig task_config_from_json(const std::string &task, const json &j) {
  TaskConfig c = default_task_config(task);
  Reader r(j, task + " config");
  if (const json *s = r.sub("mfcc")) c.mfcc = mfcc_from_json(*s, c.mfcc);
  c.arch.input_dim = c.mfcc.dims();
  if (const json *s = r.sub("arch")) c.arch = arch_from_json(*s, c.arch);
  if (const json *s = r.sub("train")) c.train = train_spec_from_json(*s, c.train);
  if (const json *s = r.sub("augment")) c.augment = augment_from_json(*s, c.augment);
  if (const json *s = r.sub("scd")) {
    Reader sr(*s, "scd");
    sr.get("delta", c.scd.delta);
    sr.finish();
    if (!(c.scd.delta > 0.0)) throw ValidationError("scd.delta must be > 0");
  }
  r.get("class_weights", c.class_weights);
  if (const json *s = r.sub("loss")) {
    c.embedding.loss = loss_spec_from_json(*s, c.embedding.loss);
  }
  if (const json *s = r.sub("batch")) {
    Reader br(*s, "batch");
    br.get("speakers", c.embedding.speakers_per_batch);
    br.get("chunks", c.embedding.chunks_per_speaker);
    br.finish();
  }
  if (const json *s = r.sub("validation")) {
    Reader vr(*s, "validation");
    vr.get("trials", c.trials);
    vr.get("trial_duration", c.trial_duration);
    vr.get("threshold", c.binarize.threshold);
    vr.get("min_duration_on", c.binarize.min_duration_on);
    vr.get("min_duration_off", c.binarize.min_duration_off);
    vr.get("peak_min_gap", c.peak_min_gap);
    vr.finish();
  }
  r.finish();

  if (c.arch.input_dim != c.mfcc.dims()) {
    throw ValidationError("arch.input_dim must equal the feature dimension (" +
                          std::to_string(c.mfcc.dims()) + ")");
  }
  const bool embedding = task == "embedding";
  if (embedding != (c.arch.head == nn::Head::embedding)) {
    throw ValidationError(task + ": wrong head for the task");
  }
  if (!embedding && c.arch.output_dim != 2) {
    throw ValidationError(task + ": labelling models have output_dim 2");
  }
  if (!c.class_weights.empty() &&
      static_cast<int>(c.class_weights.size()) != c.arch.output_dim) {
    throw ValidationError("class_weights needs one weight per class");
  }
  if (c.trials < 2 || !(c.trial_duration > 0.0)) {
    throw ValidationError("validation: need >= 2 trials of positive duration");
  }
  return c;
}

json to_json(const TaskConfig &c) {
  return {{"arch", to_json(c.arch)},
          {"train", to_json(c.train)},
          {"mfcc", to_json(c.mfcc)},
          {"augment", to_json(c.augment)},
          {"scd", {{"delta", c.scd.delta}}},
          {"class_weights", c.class_weights},
          {"loss", to_json(c.embedding.loss)},
          {"batch",
           {{"speakers", c.embedding.speakers_per_batch},
            {"chunks", c.embedding.chunks_per_speaker}}},
          {"validation",
           {{"trials", c.trials},
            {"trial_duration", c.trial_duration},
            {"threshold", c.binarize.threshold},
            {"min_duration_on", c.binarize.min_duration_on},
            {"min_duration_off", c.binarize.min_duration_off},
            {"peak_min_gap", c.peak_min_gap}}}};
}

}  // namespace diarkit
