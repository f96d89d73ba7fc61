// diarkit command-line tool: synth, train, validate, apply, tune, diarize,
// score.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "diarkit/error.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/rttm.hpp"

namespace fs = std::filesystem;
using namespace diarkit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kRuntime = 3 };

struct Globals {
  unsigned long long seed = 0;
  bool seed_given = false;
  int workers = 1;
  bool force = false;
};

void check_writable(const fs::path &p, const Globals &g) {
  if (fs::exists(p) && !g.force) {
    throw ValidationError(p.string() + " exists (use --force to overwrite)");
  }
}

void write_text(const fs::path &p, const std::string &text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

std::vector<std::string> read_uri_list(const fs::path &p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::vector<std::string> uris;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string uri;
    if (ss >> uri && uri[0] != '#') uris.push_back(uri);
  }
  if (uris.empty()) throw ValidationError(p.string() + ": no uris");
  return uris;
}

// Files of the protocol named in the list, in list order.
std::vector<CorpusFile> files_by_uri(const ProtocolSpec &p,
                                     const std::vector<std::string> &uris) {
  std::map<std::string, const FileEntry *> index;
  for (const auto &[name, entries] : p.splits) {
    for (const auto &e : entries) index[e.uri] = &e;
  }
  std::vector<CorpusFile> out;
  for (const auto &u : uris) {
    auto it = index.find(u);
    if (it == index.end()) throw ValidationError("uri '" + u + "' is not in the protocol");
    out.push_back(load_file(*it->second));
  }
  return out;
}

TaskConfig read_task_config(const std::string &task, const std::string &path) {
  if (path.empty()) return default_task_config(task);
  return task_config_from_json(task, read_json(path));
}

void emit_report(const Report &r, const std::string &report_path, const Globals &g) {
  std::cout << format_table(r);
  if (!report_path.empty()) {
    check_writable(report_path, g);
    write_text(report_path, format_report(r));
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
};

void run_synth(const SynthArgs &a, const Globals &g) {
  SynthSpec s;
  if (!a.spec.empty()) {
    std::ifstream in(a.spec);
    if (!in) throw ValidationError("cannot open " + a.spec);
    std::stringstream ss;
    ss << in.rdbuf();
    s = synth_spec_from_json(ss.str());
  }
  if (g.seed_given) s.rng_seed = g.seed;
  check_writable(fs::path(a.out) / "protocol.json", g);
  const ProtocolSpec p = generate_corpus(s, a.out, g.workers);
  std::size_t n = 0;
  for (const auto &[name, files] : p.splits) n += files.size();
  std::cout << "wrote " << n << " files to " << a.out << "\n";
}

struct TrainArgs {
  std::string task, protocol, config, out;
};

void run_train(const TrainArgs &a, const Globals &g) {
  TaskConfig c = read_task_config(a.task, a.config);
  if (g.seed_given) {
    c.train.rng_seed = g.seed;
    c.augment.rng_seed = g.seed;
  }
  check_writable(a.out, g);
  const ProtocolSpec p = load_protocol(a.protocol);
  const TrainOutcome t = train_task(c, p, [](int epoch, double loss) {
    std::printf("epoch %d loss %.6f\n", epoch, loss);
    std::fflush(stdout);
  });
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_task_model(a.out, t.model);
}

struct ValidateArgs {
  std::string task, ckpt, protocol, split = "dev", report;
};

void run_validate(const ValidateArgs &a, const Globals &g) {
  const TaskModel m = load_task_model(a.ckpt);
  if (m.config.task != a.task) {
    throw ValidationError(a.ckpt + " holds a " + m.config.task + " model");
  }
  if (!a.report.empty()) check_writable(a.report, g);
  const ProtocolSpec p = load_protocol(a.protocol);
  emit_report(validate_task(m, load_split(p, a.split), g.seed), a.report, g);
}

struct ApplyArgs {
  std::string task, ckpt, protocol, uri_list, out;
};

void run_apply(const ApplyArgs &a, const Globals &g) {
  const TaskModel m = load_task_model(a.ckpt);
  if (m.config.task != a.task) {
    throw ValidationError(a.ckpt + " holds a " + m.config.task + " model");
  }
  const ProtocolSpec p = load_protocol(a.protocol);
  const auto files = files_by_uri(p, read_uri_list(a.uri_list));
  const fs::path out(a.out);
  for (const auto &f : files) check_writable(out / (f.uri + ".scores"), g);
  fs::create_directories(out);

  AnnotationMap rttm;
  TimelineMap segments;
  for (const auto &f : files) {
    const SlidingWindowFeature x = normalized_mfcc(f.waveform, m.config.mfcc);
    if (a.task == "embedding") {
      const long chunk = std::max(1L, std::lround(m.config.train.chunk_duration / x.geometry.step));
      SlidingWindowFeature e;
      const auto starts = nn::window_starts(x.frames(), {chunk, chunk});
      e.data.resize(static_cast<long>(starts.size()), m.config.arch.output_dim);
      for (std::size_t i = 0; i < starts.size(); ++i) {
        e.data.row(static_cast<long>(i)) =
            embed_span(m.model, x.data, starts[i], std::min(chunk, x.frames()), chunk);
      }
      e.geometry = {x.geometry.start, chunk * x.geometry.step,
                    (chunk - 1) * x.geometry.step + x.geometry.window};
      nn::save_scores(out / (f.uri + ".scores"), e, f.uri);
      continue;
    }
    const SlidingWindowFeature s = score_features(m, x);
    nn::save_scores(out / (f.uri + ".scores"), s, f.uri);
    if (a.task == "scd") {
      const auto peaks =
          peak_pick(column(s, 1), s.geometry, {m.config.binarize.threshold, m.config.peak_min_gap});
      Timeline whole;
      whole.add({0.0, f.waveform.duration()});
      segments[f.uri] = split_at(whole, peaks);
    } else {
      Annotation ann(f.uri);
      const std::string label = a.task == "vad" ? "speech" : "overlap";
      for (const auto &seg : binarize(s, 1, m.config.binarize)) ann.add(seg, label);
      rttm[f.uri] = ann;
    }
  }
  if (a.task == "scd") {
    check_writable(out / "segments.uem", g);
    write_uem(out / "segments.uem", segments);
  } else if (a.task != "embedding") {
    check_writable(out / (a.task + ".rttm"), g);
    write_rttm(out / (a.task + ".rttm"), rttm);
  }
  std::cout << "processed " << files.size() << " files into " << a.out << "\n";
}

PipelineConfig read_pipeline(const std::string &path, const Globals &g) {
  PipelineConfig c = load_pipeline_config(path);
  c.workers = g.workers;
  if (g.seed_given) {
    c.seed = g.seed;
    c.reseg.train.rng_seed = g.seed;
  }
  return c;
}

std::vector<std::unique_ptr<PreparedFile>> prepare_all(
    const PipelineModels &m, const std::vector<CorpusFile> &files) {
  std::vector<std::unique_ptr<PreparedFile>> out;
  for (const auto &f : files) out.push_back(std::make_unique<PreparedFile>(m, f));
  return out;
}

std::vector<const PreparedFile *> pointers(
    const std::vector<std::unique_ptr<PreparedFile>> &v) {
  std::vector<const PreparedFile *> out;
  for (const auto &f : v) out.push_back(f.get());
  return out;
}

struct TuneArgs {
  std::string pipeline, protocol, split = "dev", out, history;
  int budget = 0;
  std::optional<unsigned long long> seed;
  bool independent = false;
};

void run_tune(const TuneArgs &a, const Globals &g) {
  PipelineConfig c = read_pipeline(a.pipeline, g);
  if (a.budget > 0) c.budget = a.budget;
  if (a.seed) c.seed = *a.seed;
  check_writable(a.out, g);
  const fs::path history = a.history.empty() ? fs::path(a.out + ".history") : fs::path(a.history);
  check_writable(history, g);
  const ProtocolSpec p = load_protocol(a.protocol);
  const PipelineModels m = load_models(c);
  const auto files = load_split(p, a.split);
  const auto prepared = prepare_all(m, files);
  const auto dev = pointers(prepared);
  const TuneResult r = a.independent ? tune_independently(m, c, dev) : tune_pipeline(m, c, dev);

  TunedParams tp{r.best.params, {}, r.best.objective, c.seed, c.budget};
  for (const auto &f : files) tp.dev_uris.push_back(f.uri);
  save_params(a.out, tp);
  write_text(history, format_history(r.history));
  std::printf("best dev DER %.4f%% after %zu trials\n", 100.0 * r.best.objective,
              r.history.size());
}

struct DiarizeArgs {
  std::string pipeline, params, protocol, uri_list, out, report;
};

void run_diarize(const DiarizeArgs &a, const Globals &g) {
  const PipelineConfig c = read_pipeline(a.pipeline, g);
  const TunedParams tp = load_params(a.params);
  check_writable(a.out, g);
  if (!a.report.empty()) check_writable(a.report, g);
  const ProtocolSpec p = load_protocol(a.protocol);
  const PipelineModels m = load_models(c);
  const auto prepared = prepare_all(m, files_by_uri(p, read_uri_list(a.uri_list)));
  const Evaluation e = evaluate(m, c, tp, pointers(prepared));
  AnnotationMap out(e.hypotheses.begin(), e.hypotheses.end());
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_rttm(a.out, out);
  emit_report(e.report, a.report, g);
}

struct ScoreArgs {
  std::string metric = "der", ref, hyp, uem, report;
  double collar = 0.0;
};

void run_score(const ScoreArgs &a, const Globals &g) {
  if (a.collar < 0.0) throw ValidationError("--collar must be >= 0");
  if (a.collar > 0.0 && a.metric != "der") {
    throw ValidationError("--collar only applies to der");
  }
  if (!a.report.empty()) check_writable(a.report, g);
  const AnnotationMap ref = read_rttm(a.ref);
  const AnnotationMap hyp = read_rttm(a.hyp);
  TimelineMap uem;
  if (!a.uem.empty()) uem = read_uem(a.uem);
  for (const auto &[uri, h] : hyp) {
    if (!ref.count(uri)) throw ValidationError("hypothesis uri '" + uri + "' has no reference");
  }

  Report r;
  auto get = [](const auto &m, const std::string &uri) {
    auto it = m.find(uri);
    return it == m.end() ? typename std::decay_t<decltype(m)>::mapped_type{} : it->second;
  };
  DiarizationError der_total;
  DetectionError det_total;
  PurityCoverage pc_total;
  PrecisionRecall pr_total;
  for (const auto &[uri, rf] : ref) {
    const Annotation hp = get(hyp, uri);
    const Timeline u = get(uem, uri);
    if (a.metric == "der") {
      const DiarizationError e = der(rf, hp, u, a.collar);
      der_total += e;
      if (e.total > 0.0) r.push_back({uri, "der", e.rate()});
    } else if (a.metric == "deter") {
      const DetectionError e = detection_error(rf, hp.speech(), u);
      det_total += e;
      if (e.total > 0.0) r.push_back({uri, "detection_error", e.rate()});
    } else if (a.metric == "purcov") {
      const PurityCoverage e = purity_coverage(rf, hp, u);
      pc_total += e;
      if (e.purity_den > 0.0 && e.coverage_den > 0.0) {
        r.push_back({uri, "purity", e.purity()});
        r.push_back({uri, "coverage", e.coverage()});
      }
    } else {
      const PrecisionRecall e = precision_recall(overlapped_speech(rf), hp.speech(), u);
      pr_total += e;
      if (e.has_precision()) r.push_back({uri, "precision", e.precision()});
      if (e.ref_positive > 0.0) r.push_back({uri, "recall", e.recall()});
    }
  }
  if (a.metric == "der") {
    r.push_back({"TOTAL", "der", der_total.rate()});
    r.push_back({"TOTAL", "false_alarm", der_total.false_alarm / der_total.total});
    r.push_back({"TOTAL", "miss", der_total.miss / der_total.total});
    r.push_back({"TOTAL", "confusion", der_total.confusion / der_total.total});
  } else if (a.metric == "deter") {
    r.push_back({"TOTAL", "detection_error", det_total.rate()});
    r.push_back({"TOTAL", "false_alarm", det_total.fa_rate()});
    r.push_back({"TOTAL", "miss", det_total.miss_rate()});
  } else if (a.metric == "purcov") {
    r.push_back({"TOTAL", "purity", pc_total.purity()});
    r.push_back({"TOTAL", "coverage", pc_total.coverage()});
  } else {
    if (pr_total.has_precision()) r.push_back({"TOTAL", "precision", pr_total.precision()});
    r.push_back({"TOTAL", "recall", pr_total.recall()});
  }
  emit_report(r, a.report, g);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Speaker diarization toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string &) {
    g.seed_given = true;
  });
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  const std::vector<std::string> tasks = {"vad", "scd", "osd", "embedding"};

  SynthArgs synth;
  auto *s_synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  s_synth->add_option("--spec", synth.spec, "Synthesis settings (JSON)")->check(CLI::ExistingFile);
  s_synth->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto *s_train = app.add_subcommand("train", "Train a model on the train split");
  s_train->add_option("--task", train.task)->required()->check(CLI::IsMember(tasks));
  s_train->add_option("--protocol", train.protocol)->required()->check(CLI::ExistingFile);
  s_train->add_option("--config", train.config, "Task settings (JSON)")->check(CLI::ExistingFile);
  s_train->add_option("--out", train.out, "Checkpoint")->required();

  ValidateArgs val;
  auto *s_val = app.add_subcommand("validate", "Evaluate a model on a split");
  s_val->add_option("--task", val.task)->required()->check(CLI::IsMember(tasks));
  s_val->add_option("--ckpt", val.ckpt)->required()->check(CLI::ExistingFile);
  s_val->add_option("--protocol", val.protocol)->required()->check(CLI::ExistingFile);
  s_val->add_option("--split", val.split, "Split (default dev)");
  s_val->add_option("--report", val.report, "Report file");

  ApplyArgs apply;
  auto *s_apply = app.add_subcommand("apply", "Score files with a model");
  s_apply->add_option("--task", apply.task)->required()->check(CLI::IsMember(tasks));
  s_apply->add_option("--ckpt", apply.ckpt)->required()->check(CLI::ExistingFile);
  s_apply->add_option("--protocol", apply.protocol)->required()->check(CLI::ExistingFile);
  s_apply->add_option("--uri-list", apply.uri_list)->required()->check(CLI::ExistingFile);
  s_apply->add_option("--out", apply.out, "Output directory")->required();

  TuneArgs tune_args;
  auto *s_tune = app.add_subcommand("tune", "Tune the pipeline on the dev split");
  s_tune->add_option("--pipeline", tune_args.pipeline)->required()->check(CLI::ExistingFile);
  s_tune->add_option("--protocol", tune_args.protocol)->required()->check(CLI::ExistingFile);
  s_tune->add_option("--budget", tune_args.budget, "Number of trials")->check(CLI::PositiveNumber);
  s_tune->add_option("--seed", tune_args.seed, "Tuner seed");
  s_tune->add_option("--split", tune_args.split, "Split (default dev)");
  s_tune->add_option("--out", tune_args.out, "Params file")->required();
  s_tune->add_option("--history", tune_args.history, "Trial history (default <out>.history)");
  s_tune->add_flag("--independent", tune_args.independent,
                   "Tune the blocks one after the other instead");

  DiarizeArgs dia;
  auto *s_dia = app.add_subcommand("diarize", "Run the tuned pipeline");
  s_dia->add_option("--pipeline", dia.pipeline)->required()->check(CLI::ExistingFile);
  s_dia->add_option("--params", dia.params)->required()->check(CLI::ExistingFile);
  s_dia->add_option("--protocol", dia.protocol)->required()->check(CLI::ExistingFile);
  s_dia->add_option("--uri-list", dia.uri_list)->required()->check(CLI::ExistingFile);
  s_dia->add_option("--out", dia.out, "Hypothesis RTTM")->required();
  s_dia->add_option("--report", dia.report, "DER report file");

  ScoreArgs score;
  auto *s_score = app.add_subcommand("score", "Compare a hypothesis with a reference");
  s_score->add_option("--metric", score.metric)
      ->check(CLI::IsMember({"der", "deter", "purcov", "pr"}));
  s_score->add_option("--ref", score.ref)->required()->check(CLI::ExistingFile);
  s_score->add_option("--hyp", score.hyp)->required()->check(CLI::ExistingFile);
  s_score->add_option("--uem", score.uem)->check(CLI::ExistingFile);
  s_score->add_option("--collar", score.collar);
  s_score->add_option("--report", score.report, "Report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (s_synth->parsed()) run_synth(synth, g);
    else if (s_train->parsed()) run_train(train, g);
    else if (s_val->parsed()) run_validate(val, g);
    else if (s_apply->parsed()) run_apply(apply, g);
    else if (s_tune->parsed()) run_tune(tune_args, g);
    else if (s_dia->parsed()) run_diarize(dia, g);
    else if (s_score->parsed()) run_score(score, g);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const FormatError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
