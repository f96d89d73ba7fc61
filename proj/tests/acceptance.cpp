// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--cli <diarkit binary>] [--work <dir>] [--only <1-7>...]
//
// Criteria 1-4 and 7 run in-process against the brute-force oracles.
// Criteria 5 and 6 drive the command-line tool through the full synthetic
// loop (synth, train x3, validate, tune, diarize, score), twice.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "diarkit/clustering.hpp"
#include "diarkit/config.hpp"
#include "diarkit/corpus.hpp"
#include "diarkit/labeling.hpp"
#include "diarkit/metrics.hpp"
#include "diarkit/rttm.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace diarkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path &p, const std::string &text) {
  std::ofstream out(p);
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  double worst = 0.0;
  unsigned long long seed = 1;
  for (const auto &arch : gradcheck::small_architectures()) {
    gradcheck::ModelCase c(arch, seed++, 4, 3);
    o.require(c.model.params().size() < 5000, "model too large");
    const double e = c.error();
    worst = std::max(worst, e);
  }
  for (LossKind k : {LossKind::triplet, LossKind::contrastive, LossKind::center,
                     LossKind::angular, LossKind::congenerous}) {
    const double e = gradcheck::loss_error(k, seed++);
    if (!(e < 1e-3)) o.require(false, to_string(k) + " " + fmt("%.2e", e));
    worst = std::max(worst, e);
  }
  const double secs = seconds_since(t0);
  o.require(worst < 1e-3, "max relative error " + fmt("%.2e", worst));
  o.require(secs < 60.0, "runtime " + fmt("%.1f s", secs));
  if (o.pass) o.detail = "max relative error " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs);
  return o;
}

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  std::mt19937_64 rng(2024);
  const double cell = 1.0 / 8.0;
  int der_bad = 0, det_bad = 0, pc_bad = 0, pr_bad = 0;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  for (int trial = 0; trial < 200; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 4, 8, 80, "r");
    const Annotation hyp = oracle::random_annotation(rng, 4, 8, 80, "h");
    if (!ref.empty()) {
      const DiarizationError e = der(ref, hyp);
      const oracle::BruteDer b = oracle::brute_force_der(ref, hyp, 0.0, 10.0, cell);
      // Times live on a 1/8 s grid, so both sides are exact binary fractions.
      if (e.total != b.total || e.false_alarm + e.miss + e.confusion != b.error) ++der_bad;
    }

    const Timeline hs = hyp.speech();
    const DetectionError d = detection_error(ref, hs);
    const double fa = oracle::measure(0.0, 10.0, cell, [&](double t) {
      return oracle::in_timeline(hs, t) && !oracle::any_active(ref, t);
    });
    const double miss = oracle::measure(0.0, 10.0, cell, [&](double t) {
      return !oracle::in_timeline(hs, t) && oracle::any_active(ref, t);
    });
    if (!close(d.false_alarm, fa) || !close(d.miss, miss)) ++det_bad;

    if (!ref.empty() && !hyp.empty()) {
      auto overlap = [&](const Segment &a, const Segment &b) {
        return oracle::measure(0.0, 10.0, cell,
                               [&](double t) { return a.contains(t) && b.contains(t); });
      };
      double pn = 0, pd = 0, cn = 0, cd = 0;
      for (const auto &h : hyp.tracks()) {
        pd += h.segment.duration();
        double best = 0;
        for (const auto &r : ref.tracks()) best = std::max(best, overlap(h.segment, r.segment));
        pn += best;
      }
      for (const auto &r : ref.tracks()) {
        cd += r.segment.duration();
        double best = 0;
        for (const auto &h : hyp.tracks()) best = std::max(best, overlap(r.segment, h.segment));
        cn += best;
      }
      const PurityCoverage pc = purity_coverage(ref, hyp, Timeline({{0, 10}}));
      if (!close(pc.purity(), pn / pd) || !close(pc.coverage(), cn / cd)) ++pc_bad;
    }

    const Timeline rs = ref.speech();
    const PrecisionRecall pr = precision_recall(rs, hs, Timeline({{0, 10}}));
    const double tp = oracle::measure(0.0, 10.0, cell, [&](double t) {
      return oracle::in_timeline(rs, t) && oracle::in_timeline(hs, t);
    });
    const double hp = oracle::measure(0.0, 10.0, cell,
                                      [&](double t) { return oracle::in_timeline(hs, t); });
    const double rp = oracle::measure(0.0, 10.0, cell,
                                      [&](double t) { return oracle::in_timeline(rs, t); });
    if (!close(pr.true_positive, tp) || !close(pr.hyp_positive, hp) ||
        !close(pr.ref_positive, rp)) {
      ++pr_bad;
    }
  }
  const double secs = seconds_since(t0);
  o.require(der_bad == 0, std::to_string(der_bad) + " der mismatches");
  o.require(det_bad == 0, std::to_string(det_bad) + " detection mismatches");
  o.require(pc_bad == 0, std::to_string(pc_bad) + " purity/coverage mismatches");
  o.require(pr_bad == 0, std::to_string(pr_bad) + " precision/recall mismatches");
  o.require(secs < 60.0, "runtime " + fmt("%.1f s", secs));
  if (o.pass) o.detail = "200 cases, " + fmt("%.1f s", secs);
  return o;
}

Outcome sliding() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<long> len(1, 400), win(1, 100), step(1, 50);
  int bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const long total = len(rng), window = win(rng), hop = std::min(step(rng), window);
    SlidingWindowFeature f;
    f.data = gradcheck::random_matrix(total, 4, rng);
    const nn::Matrix proj = gradcheck::random_matrix(4, 3, rng);
    auto score_window = [&](const nn::Matrix &w) {
      nn::Matrix s = (w * proj).array().sin().matrix();
      for (long i = 0; i < s.rows(); ++i) s.row(i) *= 1.0 + 0.02 * static_cast<double>(i);
      return s;
    };
    const nn::WindowScorer scorer = [&](const std::vector<nn::Matrix> &ws) {
      std::vector<nn::Matrix> out;
      for (const auto &w : ws) out.push_back(score_window(w));
      return out;
    };
    const SlidingWindowFeature got = nn::apply_sliding(scorer, f, {window, hop}, 5);
    nn::Matrix expected;
    if (total < window) {
      const long period = total == 1 ? 1 : 2 * (total - 1);
      nn::Matrix padded(window, 4);
      for (long i = 0; i < window; ++i) {
        long j = i % period;
        if (j >= total) j = period - j;
        padded.row(i) = f.data.row(j);
      }
      expected = score_window(padded).topRows(total);
    } else {
      std::vector<long> starts;
      for (long s = 0; s + window <= total; s += hop) starts.push_back(s);
      if (starts.back() + window != total) starts.push_back(total - window);
      expected = oracle::overlap_add(total, window, starts, [&](long s) {
        return score_window(f.data.middleRows(s, window));
      });
    }
    if (got.data.rows() != expected.rows() || got.data != expected) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " of 20 geometries differ");
  if (o.pass) o.detail = "20 geometries, exact";
  return o;
}

Outcome postprocessing() {
  Outcome o;
  const SlidingWindowGeometry g{0.0, 0.01, 0.025};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mono = 0, spacing = 0, coarse = 0, linkage = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(400);
    for (double &v : s) v = u(rng);
    Timeline prev = binarize(s, g, {0.0, 0.0, 0.0});
    for (double th = 0.05; th < 1.0; th += 0.05) {
      const Timeline cur = binarize(s, g, {th, 0.0, 0.0});
      if (difference(cur, prev).duration() > 1e-12) ++mono;
      prev = cur;
    }
    for (double gap : {0.03, 0.1, 0.5}) {
      const std::vector<double> peaks = peak_pick(s, g, {0.2, gap});
      for (std::size_t k = 1; k < peaks.size(); ++k) {
        if (peaks[k] - peaks[k - 1] < gap - 1e-9) ++spacing;
      }
    }

    const long n = 1 + trial % 6;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < n; ++i) {
      for (long j = i + 1; j < n; ++j) {
        d(i, j) = d(j, i) = trial % 2 ? 2.0 * u(rng) : std::floor(8.0 * u(rng)) / 4.0;
      }
    }
    for (double th : {0.25, 0.6, 1.0, 1.5, 2.5}) {
      if (agglomerate(d, th) != oracle::complete_linkage(d, th)) ++linkage;
    }
    std::vector<int> before = agglomerate(d, 0.0);
    for (double th = 0.1; th < 2.2; th += 0.1) {
      const std::vector<int> after = agglomerate(d, th);
      for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
          if (before[i] == before[j] && after[i] != after[j]) ++coarse;
        }
      }
      before = after;
    }
  }
  o.require(mono == 0, std::to_string(mono) + " binarize monotonicity violations");
  o.require(spacing == 0, std::to_string(spacing) + " peak spacing violations");
  o.require(coarse == 0, std::to_string(coarse) + " coarsening violations");
  o.require(linkage == 0, std::to_string(linkage) + " complete-linkage mismatches");
  if (o.pass) o.detail = "100 trials";
  return o;
}

// ---------------------------------------------------------------------------
// End-to-end loop through the command-line tool.

struct Loop {
  double vad_deter = 0, scd_purity = 0, scd_coverage = 0, eer = 0;
  double eval_der = 0, reseg_der = 0, joint_dev = 0, independent_dev = 0;
  double minutes = 0;
  std::string error;
};

std::map<std::string, double> read_report(const fs::path &p) {
  std::map<std::string, double> out;
  std::ifstream in(p);
  std::string uri, metric;
  double v;
  while (in >> uri >> metric >> v) {
    if (uri == "TOTAL") out[metric] = v;
  }
  return out;
}

double read_objective(const fs::path &p) {
  return json::parse(slurp(p)).at("objective").get<double>();
}

Loop run_loop(const std::string &cli, const fs::path &dir) {
  const auto t0 = std::chrono::steady_clock::now();
  Loop r;
  fs::remove_all(dir);
  fs::create_directories(dir / "logs");
  put(dir / "synth.json", "{\"rng_seed\": 0}\n");
  put(dir / "vad.json",
      R"({"train": {"optimizer": "adam", "lr": 0.01, "epochs": 3, "batch_size": 16}})");
  put(dir / "scd.json",
      R"({"train": {"optimizer": "adam", "lr": 0.01, "epochs": 6, "batch_size": 16}})");
  put(dir / "embedding.json", R"({"train": {"optimizer": "adam", "lr": 0.01, "epochs": 5}})");
  put(dir / "pipeline.json",
      R"({"models": {"vad": "vad.ckpt", "scd": "scd.ckpt", "embedding": "embedding.ckpt"},
 "resegmentation": {"enabled": false},
 "tuner": {"budget": 40, "seed": 0}})");
  put(dir / "pipeline_reseg.json",
      R"({"models": {"vad": "vad.ckpt", "scd": "scd.ckpt", "embedding": "embedding.ckpt"},
 "resegmentation": {"enabled": true, "epochs": 10},
 "tuner": {"budget": 40, "seed": 0}})");

  int step = 0;
  auto run = [&](const std::string &args) {
    const std::string log = (dir / "logs" / (std::to_string(++step) + ".log")).string();
    const std::string cmd = "\"" + cli + "\" --seed 0 " + args + " > \"" + log + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      throw std::runtime_error("command failed: " + args + " (see " + log + ")");
    }
  };
  const std::string d = dir.string() + "/";
  const std::string protocol = " --protocol " + d + "corpus/protocol.json";
  try {
    run("synth --spec " + d + "synth.json --out " + d + "corpus");
    const ProtocolSpec p = load_protocol(dir / "corpus" / "protocol.json");
    for (const std::string split : {"dev", "eval"}) {
      std::string list;
      for (const auto &f : p.split(split)) list += f.uri + "\n";
      put(dir / (split + ".lst"), list);
    }
    for (const std::string task : {"vad", "scd", "embedding"}) {
      run("train --task " + task + protocol + " --config " + d + task + ".json --out " + d +
          task + ".ckpt");
      run("validate --task " + task + " --ckpt " + d + task + ".ckpt" + protocol +
          " --split eval --report " + d + task + ".eval.report");
    }
    r.vad_deter = read_report(dir / "vad.eval.report").at("detection_error");
    const auto scd = read_report(dir / "scd.eval.report");
    r.scd_purity = scd.at("purity@0.5");
    r.scd_coverage = scd.at("coverage@0.5");
    r.eer = read_report(dir / "embedding.eval.report").at("eer");

    run("tune --pipeline " + d + "pipeline.json" + protocol + " --out " + d + "params.json");
    run("tune --independent --pipeline " + d + "pipeline.json" + protocol + " --out " + d +
        "params_independent.json");
    r.joint_dev = read_objective(dir / "params.json");
    r.independent_dev = read_objective(dir / "params_independent.json");

    run("diarize --pipeline " + d + "pipeline.json --params " + d + "params.json" + protocol +
        " --uri-list " + d + "eval.lst --out " + d + "eval.rttm --report " + d +
        "eval.report");
    run("diarize --pipeline " + d + "pipeline_reseg.json --params " + d + "params.json" +
        protocol + " --uri-list " + d + "eval.lst --out " + d + "eval_reseg.rttm --report " +
        d + "eval_reseg.report");
    r.reseg_der = read_report(dir / "eval_reseg.report").at("der");

    // Score the hypothesis against the references independently of diarize.
    AnnotationMap refs;
    for (const auto &e : p.split("eval")) {
      for (auto &[uri, a] : read_rttm(e.rttm)) refs[uri] = a;
    }
    write_rttm(dir / "eval.ref.rttm", refs);
    TimelineMap uems;
    for (const auto &e : p.split("eval")) {
      if (!e.uem.empty()) {
        for (auto &[uri, t] : read_uem(e.uem)) uems[uri] = t;
      }
    }
    std::string uem_arg;
    if (!uems.empty()) {
      write_uem(dir / "eval.uem", uems);
      uem_arg = " --uem " + d + "eval.uem";
    }
    run("score --metric der --ref " + d + "eval.ref.rttm --hyp " + d + "eval.rttm" + uem_arg +
        " --report " + d + "eval.score.report");
    r.eval_der = read_report(dir / "eval.score.report").at("der");
    const double diarize_der = read_report(dir / "eval.report").at("der");
    // the rttm stores times to the millisecond
    if (std::abs(diarize_der - r.eval_der) > 1e-3) {
      throw std::runtime_error("score and diarize disagree on eval DER");
    }
  } catch (const std::exception &e) {
    r.error = e.what();
  }
  r.minutes = seconds_since(t0) / 60.0;
  return r;
}

Outcome end_to_end(const Loop &l) {
  Outcome o;
  if (!l.error.empty()) {
    o.require(false, l.error);
    return o;
  }
  o.require(l.vad_deter < 0.10, "VAD DetER " + fmt("%.2f%%", 100 * l.vad_deter));
  o.require(l.scd_purity >= 0.85, "SCD purity " + fmt("%.2f%%", 100 * l.scd_purity));
  o.require(l.scd_coverage >= 0.85, "SCD coverage " + fmt("%.2f%%", 100 * l.scd_coverage));
  o.require(l.eer < 0.10, "EER " + fmt("%.2f%%", 100 * l.eer));
  o.require(l.eval_der < 0.25, "eval DER " + fmt("%.2f%%", 100 * l.eval_der));
  o.require(l.reseg_der <= l.eval_der + 0.02,
            "re-segmented DER " + fmt("%.2f%%", 100 * l.reseg_der));
  o.require(l.joint_dev <= l.independent_dev,
            "joint dev DER " + fmt("%.2f%%", 100 * l.joint_dev) + " > independent " +
                fmt("%.2f%%", 100 * l.independent_dev));
  o.require(l.minutes < 30.0, "runtime " + fmt("%.1f min", l.minutes));
  o.detail = (o.pass ? "" : o.detail + " | ") + "DetER " + fmt("%.2f%%", 100 * l.vad_deter) +
             ", purity " + fmt("%.2f%%", 100 * l.scd_purity) + ", coverage " +
             fmt("%.2f%%", 100 * l.scd_coverage) + ", EER " + fmt("%.2f%%", 100 * l.eer) +
             ", eval DER " + fmt("%.2f%%", 100 * l.eval_der) + ", resegmented " +
             fmt("%.2f%%", 100 * l.reseg_der) + ", dev DER joint " +
             fmt("%.2f%%", 100 * l.joint_dev) + " vs independent " +
             fmt("%.2f%%", 100 * l.independent_dev) + ", " + fmt("%.1f min", l.minutes);
  return o;
}

Outcome determinism(const fs::path &a, const fs::path &b, const Loop &la, const Loop &lb) {
  Outcome o;
  if (!la.error.empty() || !lb.error.empty()) {
    o.require(false, "loop failed: " + (la.error.empty() ? lb.error : la.error));
    return o;
  }
  int compared = 0, rttms = 0;
  for (const auto &e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() == ".log") continue;
    const fs::path rel = fs::relative(e.path(), a);
    ++compared;
    if (e.path().extension() == ".rttm") ++rttms;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) {
      o.require(false, rel.string() + " differs");
    }
  }
  const bool same = la.vad_deter == lb.vad_deter && la.scd_purity == lb.scd_purity &&
                    la.scd_coverage == lb.scd_coverage && la.eer == lb.eer &&
                    la.eval_der == lb.eval_der && la.reseg_der == lb.reseg_der &&
                    la.joint_dev == lb.joint_dev && la.independent_dev == lb.independent_dev;
  o.require(same, "metrics differ");
  if (o.pass) {
    o.detail = std::to_string(compared) + " artifacts identical (" + std::to_string(rttms) +
               " RTTM), metrics equal to full precision";
  }
  return o;
}

Outcome formats(const std::string &cli, const fs::path &work) {
  Outcome o;
  const fs::path data = DIARKIT_TEST_DATA;
  const AnnotationMap m = read_rttm(data / "meeting.rttm");
  o.require(format_rttm(m) == slurp(data / "meeting.expected.rttm"), "RTTM golden file");
  std::istringstream again(format_rttm(m));
  o.require(format_rttm(parse_rttm(again)) == format_rttm(m), "RTTM round trip");
  const TimelineMap u = read_uem(data / "meeting.uem");
  o.require(format_uem(u) == slurp(data / "meeting.expected.uem"), "UEM golden file");
  std::istringstream uagain(format_uem(u));
  o.require(parse_uem(uagain) == u, "UEM round trip");

  fs::create_directories(work);
  for (const std::string metric : {"der", "deter"}) {
    const fs::path report = work / (metric + ".report");
    fs::remove(report);
    const std::string cmd = "\"" + cli + "\" score --metric " + metric + " --ref " +
                            (data / "meeting.rttm").string() + " --hyp " +
                            (data / "meeting.rttm").string() + " --report " +
                            report.string() + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      o.require(false, "score " + metric + " failed");
      continue;
    }
    const std::string key = metric == "der" ? "der" : "detection_error";
    const auto r = read_report(report);
    o.require(r.count(key) && r.at(key) == 0.0, "score " + metric + " on hyp = ref is not 0");
  }
  if (o.pass) o.detail = "golden files match, score hyp = ref gives DER 0 and DetER 0";
  return o;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"diarkit acceptance run"};
  std::string cli = DIARKIT_CLI;
  std::string work = (fs::temp_directory_path() / "diarkit_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "diarkit binary");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Criteria to run")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int c) { return only.empty() || std::count(only.begin(), only.end(), c); };

  const char *names[] = {"",
                         "gradient correctness",
                         "metric oracle equivalence",
                         "sliding-window aggregation",
                         "post-processing properties",
                         "end-to-end synthetic benchmark",
                         "determinism",
                         "format fidelity"};
  bool all = true;
  auto report = [&](int c, const Outcome &o) {
    std::printf("criterion %d (%s): %s  %s\n", c, names[c], o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  };

  if (wanted(1)) report(1, gradients());
  if (wanted(2)) report(2, metric_oracles());
  if (wanted(3)) report(3, sliding());
  if (wanted(4)) report(4, postprocessing());
  if (wanted(5) || wanted(6)) {
    const fs::path root(work);
    const Loop first = run_loop(cli, root / "run1");
    if (wanted(5)) report(5, end_to_end(first));
    if (wanted(6)) {
      const Loop second = run_loop(cli, root / "run2");
      report(6, determinism(root / "run1", root / "run2", first, second));
    }
  }
  if (wanted(7)) report(7, formats(cli, fs::path(work) / "formats"));
  return all ? 0 : 1;
}
