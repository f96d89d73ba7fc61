#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "diarkit/error.hpp"
#include "diarkit/pipeline.hpp"

namespace diarkit {

namespace {

constexpr double kGolden = 0.6180339887498949;

double unit_uniform(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> evaluate_all(const TuneObjective &objective,
                                 const std::vector<Hyperparameters> &points,
                                 int workers) {
  std::vector<double> values(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      try {
        values[i] = objective(points[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return values;
}

ParamBound bound_of(const HyperparameterSpace &space, const std::string &name) {
  for (const auto &b : space.params) {
    if (b.name == name) return b;
  }
  for (const auto &b : default_space(true).params) {
    if (b.name == name) return b;
  }
  throw ValidationError("unknown hyperparameter '" + name + "'");
}

void append_history(TuneResult &into, const TuneResult &stage,
                    const std::string &prefix) {
  for (TuneTrial t : stage.history) {
    t.index = static_cast<int>(into.history.size());
    t.phase = prefix + ":" + t.phase;
    into.history.push_back(std::move(t));
  }
}

}  // namespace

Hyperparameters sample_point(const HyperparameterSpace &space,
                             const Hyperparameters &base, std::mt19937_64 &rng) {
  Hyperparameters h = base;
  for (const auto &b : space.params) {
    set_param(h, b.name, b.min + (b.max - b.min) * unit_uniform(rng));
  }
  return h;
}

TuneResult tune(const HyperparameterSpace &space, const TuneObjective &objective,
                int budget, unsigned long long seed, const Hyperparameters &base,
                int workers) {
  space.validate();
  if (budget < 1) throw ValidationError("tuning budget must be >= 1");
  const int n_random =
      std::clamp(static_cast<int>(std::lround(0.8 * budget)), 1, budget);

  TuneResult r;
  auto record = [&](const std::string &phase, const Hyperparameters &h, double value) {
    TuneTrial t{static_cast<int>(r.history.size()), phase, h, value, seed};
    if (r.history.empty() || value < r.best.objective) r.best = t;
    r.history.push_back(std::move(t));
  };

  std::mt19937_64 rng(seed);
  std::vector<Hyperparameters> points;
  for (int i = 0; i < n_random; ++i) points.push_back(sample_point(space, base, rng));
  const std::vector<double> values = evaluate_all(objective, points, workers);
  for (int i = 0; i < n_random; ++i) record("random", points[i], values[i]);

  int remaining = budget - n_random;
  const int dims = static_cast<int>(space.params.size());
  const int per_coord = std::max(2, (remaining + dims - 1) / dims);
  for (int k = 0; remaining > 0; k = (k + 1) % dims) {
    const ParamBound &b = space.params[k];
    const Hyperparameters origin = r.best.params;
    const double x = get_param(origin, b.name);
    const double radius = 0.15 * (b.max - b.min);
    double lo = std::max(b.min, x - radius), hi = std::min(b.max, x + radius);
    int evals = std::min(remaining, per_coord);
    remaining -= evals;

    auto f = [&](double v) {
      Hyperparameters h = origin;
      set_param(h, b.name, v);
      const double value = objective(h);
      record("refine", h, value);
      return value;
    };
    double c = hi - kGolden * (hi - lo), d = lo + kGolden * (hi - lo);
    double fc = f(c);
    if (--evals == 0) continue;
    double fd = f(d);
    while (--evals > 0) {
      if (fc <= fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - kGolden * (hi - lo);
        fc = f(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + kGolden * (hi - lo);
        fd = f(d);
      }
    }
  }
  return r;
}

TuneResult tune_pipeline(const PipelineModels &models, const PipelineConfig &c,
                         std::span<const PreparedFile *const> dev) {
  if (dev.empty()) throw ValidationError("tuning set is empty");
  auto objective = [&](const Hyperparameters &h) {
    return pipeline_der(models, c, h, dev).rate();
  };
  return tune(c.space, objective, c.budget, c.seed, c.defaults, c.workers);
}

TuneResult tune_independently(const PipelineModels &models,
                              const PipelineConfig &c,
                              std::span<const PreparedFile *const> dev) {
  if (dev.empty()) throw ValidationError("tuning set is empty");
  const int stage_budget = std::max(1, c.budget / 3);
  TuneResult out;

  HyperparameterSpace vad_space{{bound_of(c.space, "vad_threshold")}};
  auto detection = [&](const Hyperparameters &h) {
    DetectionError total;
    for (const PreparedFile *f : dev) {
      total += vad_error(f->vad_scores(), f->reference(), f->uem(),
                         {h.vad_threshold, h.min_duration_on, h.min_duration_off});
    }
    return total.rate();
  };
  const TuneResult vad = tune(vad_space, detection, stage_budget, c.seed,
                              c.defaults, c.workers);
  append_history(out, vad, "vad");

  HyperparameterSpace scd_space{{bound_of(c.space, "scd_threshold")}};
  auto segmentation = [&](const Hyperparameters &h) {
    PurityCoverage total;
    for (const PreparedFile *f : dev) {
      total += scd_segmentation(f->scd_scores(), f->reference(), f->uem(),
                                {h.scd_threshold, c.scd_min_gap});
    }
    return 1.0 - total.f_measure();
  };
  const TuneResult scd = tune(scd_space, segmentation, stage_budget, c.seed + 1,
                              vad.best.params, c.workers);
  append_history(out, scd, "scd");

  HyperparameterSpace cluster_space{{bound_of(c.space, "cluster_threshold")}};
  auto diarization = [&](const Hyperparameters &h) {
    return pipeline_der(models, c, h, dev).rate();
  };
  const TuneResult cluster = tune(cluster_space, diarization, stage_budget,
                                  c.seed + 2, scd.best.params, c.workers);
  append_history(out, cluster, "cluster");

  out.best = cluster.best;
  out.best.phase = "cluster:" + out.best.phase;
  return out;
}

void save_params(const std::filesystem::path &path, const TunedParams &p) {
  json params = json::object();
  for (const auto &name : hyperparameter_names()) params[name] = get_param(p.params, name);
  const json j = {{"params", params},
                  {"dev_uris", p.dev_uris},
                  {"objective", p.dev_der},
                  {"seed", p.seed},
                  {"budget", p.budget}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

TunedParams load_params(const std::filesystem::path &path) {
  const json j = read_json(path);
  TunedParams p;
  try {
    for (const auto &[k, v] : j.at("params").items()) set_param(p.params, k, v.get<double>());
    p.dev_uris = j.at("dev_uris").get<std::vector<std::string>>();
    if (j.contains("objective")) p.dev_der = j.at("objective").get<double>();
    if (j.contains("seed")) p.seed = j.at("seed").get<unsigned long long>();
    if (j.contains("budget")) p.budget = j.at("budget").get<int>();
  } catch (const json::exception &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return p;
}

std::string format_history(const std::vector<TuneTrial> &history) {
  std::string out = "index phase";
  for (const auto &name : hyperparameter_names()) out += " " + name;
  out += " objective\n";
  char buf[64];
  for (const auto &t : history) {
    out += std::to_string(t.index) + " " + t.phase;
    for (const auto &name : hyperparameter_names()) {
      std::snprintf(buf, sizeof buf, " %.17g", get_param(t.params, name));
      out += buf;
    }
    std::snprintf(buf, sizeof buf, " %.17g\n", t.objective);
    out += buf;
  }
  return out;
}

}  // namespace diarkit
