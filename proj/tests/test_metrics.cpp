#include <doctest.h>

#include <random>

#include "diarkit/error.hpp"
#include "diarkit/metrics.hpp"
#include "oracles.hpp"

using namespace diarkit;

namespace {

constexpr double kCell = 1.0 / 8.0;

Timeline random_segments(std::mt19937_64 &rng, int max_segments) {
  std::uniform_int_distribution<int> n(1, max_segments), pos(0, 79);
  Timeline t;
  const int k = n(rng);
  for (int i = 0; i < k; ++i) {
    int a = pos(rng), b = pos(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    t.add({a / 8.0, b / 8.0});
  }
  return t;
}

double brute_assignment(const Eigen::MatrixXd &w) {
  std::vector<int> cols(w.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0.0;
  // Rows map to distinct columns; pad so every permutation prefix is tried.
  std::vector<int> perm(std::max(w.rows(), w.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double s = 0.0;
    for (long r = 0; r < w.rows(); ++r) {
      if (perm[r] < w.cols()) s += w(r, perm[r]);
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("der matches exhaustive mapping search") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 4, 8, 80, "r");
    const Annotation hyp = oracle::random_annotation(rng, 4, 8, 80, "h");
    if (ref.empty()) continue;
    const DiarizationError e = der(ref, hyp);
    const oracle::BruteDer b = oracle::brute_force_der(ref, hyp, 0.0, 10.0, kCell);
    CHECK(e.total == doctest::Approx(b.total).epsilon(1e-12));
    CHECK(e.false_alarm + e.miss + e.confusion ==
          doctest::Approx(b.error).epsilon(1e-12));
    CHECK(e.false_alarm >= 0.0);
    CHECK(e.miss >= 0.0);
    CHECK(e.confusion >= 0.0);
  }
}

TEST_CASE("der inside a uem matches exhaustive search on the uem") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 3, 6, 80, "r");
    const Annotation hyp = oracle::random_annotation(rng, 3, 6, 80, "h");
    const Timeline uem = random_segments(rng, 3);
    const DiarizationError e = der(ref, hyp, uem);
    const oracle::BruteDer b = oracle::brute_force_der(ref, hyp, 0.0, 10.0, kCell, uem);
    CHECK(e.total == doctest::Approx(b.total).epsilon(1e-12));
    CHECK(e.false_alarm + e.miss + e.confusion ==
          doctest::Approx(b.error).epsilon(1e-12));
  }
}

TEST_CASE("collar removes a symmetric zone around reference boundaries") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 3, 6, 80, "r");
    const Annotation hyp = oracle::random_annotation(rng, 3, 6, 80, "h");
    if (ref.empty()) continue;
    const double collar = 0.25;
    // Cells whose middle is within collar/2 of a reference boundary are
    // unscored; the rest, restricted to the default extent, form the uem.
    const Segment extent = union_of(ref.timeline(), hyp.timeline()).extent();
    std::vector<Segment> kept;
    for (double t = 0.0; t < 10.0; t += kCell) {
      const double m = t + 0.5 * kCell;
      if (!extent.contains(m)) continue;
      bool near = false;
      for (const auto &tr : ref.tracks()) {
        near = near || std::abs(m - tr.segment.start) <= 0.5 * collar ||
               std::abs(m - tr.segment.end) <= 0.5 * collar;
      }
      if (!near) kept.push_back({t, t + kCell});
    }
    const Timeline uem = Timeline(kept).support();
    const DiarizationError e = der(ref, hyp, {}, collar);
    if (uem.empty()) {
      CHECK(e.total == 0.0);
      continue;
    }
    const oracle::BruteDer b = oracle::brute_force_der(ref, hyp, 0.0, 10.0, kCell, uem);
    CHECK(e.total == doctest::Approx(b.total).epsilon(1e-12));
    CHECK(e.false_alarm + e.miss + e.confusion ==
          doctest::Approx(b.error).epsilon(1e-12));
  }
}

TEST_CASE("der of a relabelled reference is zero") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 4, 8);
    if (ref.empty()) continue;
    std::map<std::string, std::string> rename;
    for (const auto &l : ref.labels()) rename[l] = "x" + l;
    const DiarizationError e = der(ref, ref.rename_labels(rename));
    CHECK(e.false_alarm == 0.0);
    CHECK(e.miss == 0.0);
    CHECK(e.confusion == 0.0);
    CHECK(e.rate() == 0.0);
  }
}

TEST_CASE("der components on a hand-made case") {
  Annotation ref("f"), hyp("f");
  ref.add({0, 4}, "A");
  ref.add({4, 8}, "B");
  ref.add({6, 8}, "C");
  hyp.add({0, 5}, "x");
  hyp.add({5, 9}, "y");
  // x->A, y->B: 4 correct for A; [4,5) confusion; [5,8) B correct; C missed
  // over [6,8); [8,9) false alarm.
  const DiarizationError e = der(ref, hyp);
  CHECK(e.total == 10.0);
  CHECK(e.confusion == 1.0);
  CHECK(e.miss == 2.0);
  CHECK(e.false_alarm == 1.0);
  CHECK(e.rate() == 0.4);
  CHECK_THROWS_AS(der(Annotation("f"), hyp).rate(), MetricError);
}

TEST_CASE("detection error matches counting") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 200; ++trial) {
    const Annotation ref = oracle::random_annotation(rng, 3, 6);
    const Timeline hyp = random_segments(rng, 6);
    const DetectionError e = detection_error(ref, hyp);
    const double fa = oracle::measure(0.0, 10.0, kCell, [&](double t) {
      return oracle::in_timeline(hyp, t) && !oracle::any_active(ref, t);
    });
    const double miss = oracle::measure(0.0, 10.0, kCell, [&](double t) {
      return !oracle::in_timeline(hyp, t) && oracle::any_active(ref, t);
    });
    const double total = oracle::measure(0.0, 10.0, kCell,
                                         [&](double t) { return oracle::any_active(ref, t); });
    CHECK(e.false_alarm == doctest::Approx(fa).epsilon(1e-9));
    CHECK(e.miss == doctest::Approx(miss).epsilon(1e-9));
    CHECK(e.total == doctest::Approx(total).epsilon(1e-9));
  }
}

TEST_CASE("purity and coverage match segment-by-segment counting") {
  std::mt19937_64 rng(26);
  auto overlap = [](const Segment &a, const Segment &b) {
    return oracle::measure(0.0, 10.0, kCell,
                           [&](double t) { return a.contains(t) && b.contains(t); });
  };
  for (int trial = 0; trial < 200; ++trial) {
    const Timeline ref = random_segments(rng, 5), hyp = random_segments(rng, 5);
    if (ref.empty() || hyp.empty()) continue;
    double pn = 0, pd = 0, cn = 0, cd = 0;
    for (const auto &h : hyp) {
      pd += h.duration();
      double best = 0;
      for (const auto &r : ref) best = std::max(best, overlap(h, r));
      pn += best;
    }
    for (const auto &r : ref) {
      cd += r.duration();
      double best = 0;
      for (const auto &h : hyp) best = std::max(best, overlap(r, h));
      cn += best;
    }
    const PurityCoverage pc = purity_coverage(ref, hyp);
    CHECK(pc.purity() == doctest::Approx(pn / pd).epsilon(1e-9));
    CHECK(pc.coverage() == doctest::Approx(cn / cd).epsilon(1e-9));
    const double f = pc.f_measure();
    CHECK(f <= std::max(pc.purity(), pc.coverage()) + 1e-12);
    CHECK(f >= std::min(pc.purity(), pc.coverage()) - 1e-12);
  }
  const Timeline one({{0, 10}});
  const Timeline halves({{0, 5}, {5, 10}});
  CHECK(purity_coverage(one, halves).purity() == 1.0);
  CHECK(purity_coverage(one, halves).coverage() == 0.5);
  CHECK(purity_coverage(halves, one).purity() == 0.5);
}

TEST_CASE("precision and recall on frames and on durations") {
  const std::vector<int> ref{1, 1, 0, 0, 1, 0}, hyp{1, 0, 1, 0, 1, 0};
  const PrecisionRecall pr = precision_recall(ref, hyp);
  CHECK(pr.true_positive == 2);
  CHECK(pr.precision() == doctest::Approx(2.0 / 3.0));
  CHECK(pr.recall() == doctest::Approx(2.0 / 3.0));
  const std::vector<int> mask{1, 1, 0, 1, 1, 1};
  CHECK(precision_recall(ref, hyp, mask).precision() == 1.0);

  const std::vector<int> none(6, 0);
  const PrecisionRecall empty = precision_recall(ref, none);
  CHECK_FALSE(empty.has_precision());
  CHECK_THROWS_AS(empty.precision(), MetricError);
  CHECK(empty.recall() == 0.0);

  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 100; ++trial) {
    const Timeline r = random_segments(rng, 4), h = random_segments(rng, 4);
    const PrecisionRecall d = precision_recall(r, h, Timeline({{0, 10}}));
    const double tp = oracle::measure(0.0, 10.0, kCell, [&](double t) {
      return oracle::in_timeline(r, t) && oracle::in_timeline(h, t);
    });
    const double hp = oracle::measure(0.0, 10.0, kCell,
                                      [&](double t) { return oracle::in_timeline(h, t); });
    CHECK(d.true_positive == doctest::Approx(tp).epsilon(1e-9));
    CHECK(d.hyp_positive == doctest::Approx(hp).epsilon(1e-9));
  }
}

TEST_CASE("assignment matches brute force") {
  std::mt19937_64 rng(28);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd w(dim(rng), dim(rng));
    for (long i = 0; i < w.size(); ++i) w.data()[i] = u(rng) < 0.3 ? 0.0 : u(rng);
    const std::vector<int> a = max_weight_assignment(w);
    REQUIRE(static_cast<long>(a.size()) == w.rows());
    std::set<int> used;
    double total = 0.0;
    for (long r = 0; r < w.rows(); ++r) {
      if (a[r] < 0) continue;
      CHECK(used.insert(a[r]).second);
      total += w(r, a[r]);
    }
    CHECK(total == doctest::Approx(brute_assignment(w)).epsilon(1e-12));
  }
}

TEST_CASE("equal error rate") {
  const std::vector<double> hi{0.9, 0.8}, lo{0.1, 0.2};
  CHECK(eer(hi, lo) == 0.0);
  CHECK(eer(lo, hi) == doctest::Approx(0.5));
  const std::vector<double> same{0.5, 0.5};
  CHECK(eer(same, same) == doctest::Approx(0.5));
  // ROC hull (0,1) (0,.5) (.5,0) (1,0); crossing at 0.25.
  const std::vector<double> t{0.9, 0.4}, n{0.6, 0.1};
  CHECK(eer(t, n) == doctest::Approx(0.25));
  CHECK_THROWS_AS(eer({}, n), MetricError);

  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> tg(40), nt(60);
    for (double &v : tg) v = g(rng) + 1.0;
    for (double &v : nt) v = g(rng);
    // Hull EER never exceeds the best threshold's worse error rate.
    double best = 1.0;
    std::vector<double> thresholds = tg;
    thresholds.insert(thresholds.end(), nt.begin(), nt.end());
    thresholds.push_back(1e9);
    for (double th : thresholds) {
      const double pmiss =
          std::count_if(tg.begin(), tg.end(), [&](double v) { return v < th; }) / 40.0;
      const double pfa =
          std::count_if(nt.begin(), nt.end(), [&](double v) { return v >= th; }) / 60.0;
      best = std::min(best, std::max(pmiss, pfa));
    }
    const double e = eer(tg, nt);
    CHECK(e <= best + 1e-12);
    CHECK(e >= 0.0);
    CHECK(e <= 0.5);
  }
}
