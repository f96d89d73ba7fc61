#include <doctest.h>

#include <random>

#include "diarkit/clustering.hpp"
#include "oracles.hpp"

using namespace diarkit;

namespace {

Eigen::MatrixXd random_distances(std::mt19937_64 &rng, long n, bool quantised) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::uniform_int_distribution<int> q(0, 8);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = i + 1; j < n; ++j) d(i, j) = d(j, i) = quantised ? q(rng) / 4.0 : u(rng);
  }
  return d;
}

int cluster_count(const std::vector<int> &labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

}  // namespace

TEST_CASE("complete linkage matches exhaustive recomputation") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    // Quantised distances exercise tie breaking.
    const Eigen::MatrixXd d = random_distances(rng, size(rng), trial % 2 == 0);
    for (double th : {0.3, 0.75, 1.0, 1.6, 2.5}) {
      const std::vector<int> got = agglomerate(d, th);
      CHECK(got == oracle::complete_linkage(d, th));
    }
  }
}

TEST_CASE("clusters respect the threshold and number by first member") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd d = random_distances(rng, 12, false);
    const std::vector<int> l = agglomerate(d, 1.0);
    int next = 0;
    for (long i = 0; i < 12; ++i) {
      if (l[i] == next) ++next;
      CHECK(l[i] < next);
      for (long j = 0; j < 12; ++j) {
        if (l[i] == l[j]) CHECK(d(i, j) < 1.0);
      }
    }
  }
}

TEST_CASE("raising the threshold only merges clusters") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd d = random_distances(rng, 10, false);
    std::vector<int> prev = agglomerate(d, 0.0);
    CHECK(cluster_count(prev) == 10);
    for (double th = 0.2; th <= 2.2; th += 0.2) {
      const std::vector<int> cur = agglomerate(d, th);
      CHECK(cluster_count(cur) <= cluster_count(prev));
      for (long i = 0; i < 10; ++i) {
        for (long j = 0; j < 10; ++j) {
          if (prev[i] == prev[j]) CHECK(cur[i] == cur[j]);
        }
      }
      prev = cur;
    }
    CHECK(cluster_count(agglomerate(d, 2.1)) == 1);
  }
  CHECK(agglomerate(Eigen::MatrixXd(0, 0), 1.0).empty());
}

TEST_CASE("cosine distances of unit vectors") {
  std::mt19937_64 rng(34);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Eigen::RowVectorXd> e;
  for (int i = 0; i < 8; ++i) {
    Eigen::RowVectorXd v(5);
    for (int k = 0; k < 5; ++k) v[k] = n(rng);
    e.push_back(v.normalized());
  }
  e.push_back(-e[0]);
  const Eigen::MatrixXd d = cosine_distances(e);
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.diagonal().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d.minCoeff() >= 0.0);
  CHECK(d.maxCoeff() <= 2.0);
  CHECK(d(0, 8) == doctest::Approx(2.0));
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(d(i, j) == doctest::Approx(1.0 - e[i].dot(e[j])));
    }
  }
  const AffinityMatrix a = affinity(e, std::vector<Segment>(9, Segment{0, 1}));
  CHECK(a.distances == d);
}

TEST_CASE("frames of a segment are those whose middle it contains") {
  const SlidingWindowGeometry g{0.0, 0.01, 0.025};
  const long total = 500;
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 0.02) continue;
    const auto [first, count] = frames_of({a, b}, g, total);
    CHECK(count >= 1);
    for (long i = 0; i < total; ++i) {
      const bool in = g.middle(i) >= a && g.middle(i) < b;
      if (in) CHECK((i >= first && i < first + count));
    }
    CHECK(first + count <= total);
  }
  // Very short segment still maps to one frame.
  const auto [f, c] = frames_of({1.0, 1.001}, g, total);
  CHECK(c == 1);
  CHECK(std::abs(g.middle(f) - 1.0005) <= 0.005 + 1e-12);
}
