#include <doctest.h>

#include <fstream>
#include <random>

#include "diarkit/error.hpp"
#include "diarkit/nnet.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace diarkit;
using namespace diarkit::nn;
using gradcheck::op_error;
using gradcheck::random_matrix;

TEST_CASE("tape ops: analytic gradients match central differences") {
  std::mt19937_64 rng(11);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(4, 2, rng);
  const Matrix r = random_matrix(1, 4, rng);
  const std::vector<int> labels{1, 0, 2};
  const std::vector<int> spk{0, 0, 1, 1, 2};
  const double tol = 1e-6;

  // Random fixed projection to a scalar.
  auto fixed = [&](unsigned seed) {
    return [seed](Tape &t, const Var &v) {
      std::mt19937_64 g(seed);
      return sum(mul(v, t.constant(random_matrix(v.rows(), v.cols(), g))));
    };
  };

  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(1)(t, matmul(x, t.constant(w))); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(2)(t, matmul(t.constant(w.transpose()), transpose(x))); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(3)(t, add(x, mul(x, x))); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(4)(t, sub(scale(x, 2.5), x)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(5)(t, add_row(x, t.constant(r))); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(6)(t, add_row(t.constant(a), x)); }, r) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(7)(t, tanh(x)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(8)(t, sigmoid(x)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(9)(t, square(x)); }, a) < tol);
  CHECK(op_error([&](Tape &, const Var &x) { return mean(tanh(x)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(10)(t, rows(x, 1, 2)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(11)(t, cols(x, 1, 2)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) {
          const Var parts[] = {x, tanh(x)};
          return fixed(12)(t, vcat(parts));
        }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) {
          const Var parts[] = {x, square(x)};
          return fixed(13)(t, hcat(parts));
        }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(14)(t, softmax(x)); }, a) < tol);
  CHECK(op_error([&](Tape &, const Var &x) { return softmax_cross_entropy(x, labels); },
                 random_matrix(3, 3, rng)) < tol);
  const std::vector<double> cw{0.5, 2.0, 1.0};
  CHECK(op_error([&](Tape &, const Var &x) { return softmax_cross_entropy(x, labels, cw); },
                 random_matrix(3, 3, rng)) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(15)(t, l2_normalize_rows(x)); }, a) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return fixed(16)(t, time_stats(x, 3, 2)); },
                 random_matrix(6, 3, rng)) < tol);

  // Distance-based losses on a well-separated random distance matrix.
  auto dist = [&](Tape &, const Var &x) { return add(x, transpose(x)); };
  const Matrix d0 = random_matrix(5, 5, rng, 0.3).cwiseAbs();
  CHECK(op_error([&](Tape &t, const Var &x) { return triplet_hinge(dist(t, x), spk, 0.5); }, d0) < tol);
  CHECK(op_error([&](Tape &t, const Var &x) { return contrastive_pairs(dist(t, x), spk, 1.5); }, d0) < tol);
  const Matrix cosines = random_matrix(3, 3, rng, 0.3);
  CHECK(op_error([&](Tape &, const Var &x) {
          return softmax_cross_entropy(angular_margin_logits(x, labels, 0.2, 5.0), labels);
        }, cosines) < tol);
}

TEST_CASE("tape op values") {
  Tape t;
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const Var x = t.constant(m);
  CHECK(sum(x).scalar() == 10.0);
  CHECK(mean(x).scalar() == 2.5);
  const Var s = softmax(x);
  CHECK(s.value().row(0).sum() == doctest::Approx(1.0));
  const Var st = time_stats(x, 2, 1);  // rows are time steps of one sequence
  CHECK(st.value()(0, 0) == 2.0);
  CHECK(st.value()(0, 2) == doctest::Approx(1.0));
  const std::vector<int> y{1, 0};
  const double ce = softmax_cross_entropy(x, y).scalar();
  const double expected = 0.5 * (-std::log(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0))) -
                                 std::log(std::exp(3.0) / (std::exp(3.0) + std::exp(4.0))));
  CHECK(ce == doctest::Approx(expected));
  const Var n = l2_normalize_rows(x);
  CHECK(n.value().row(1).norm() == doctest::Approx(1.0));
}

TEST_CASE("every architecture: parameter gradients match central differences") {
  for (const auto &arch : gradcheck::small_architectures()) {
    gradcheck::ModelCase c(arch, 5, 4, 2);
    CHECK(c.model.params().size() < 5000);
    CAPTURE(to_string(arch.cell));
    CAPTURE(to_string(arch.head));
    CHECK(c.error() < 1e-3);
  }
}

TEST_CASE("model outputs") {
  ArchSpec soft{3, 1, 4, Cell::lstm, Pooling::none, {4}, 2, Head::softmax};
  SequenceModel m(soft, 1);
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(7, 3, rng);
  const Matrix p = m.predict(x);
  CHECK(p.rows() == 7);
  CHECK(p.cols() == 2);
  for (long i = 0; i < 7; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0));

  ArchSpec emb{3, 1, 4, Cell::gru, Pooling::stats, {4}, 5, Head::embedding};
  SequenceModel e(emb, 1);
  const Matrix v = e.predict(x);
  CHECK(v.rows() == 1);
  CHECK(v.norm() == doctest::Approx(1.0));

  // Batched prediction equals one-by-one prediction.
  const Matrix y = random_matrix(7, 3, rng);
  const auto batch = m.predict(std::vector<Matrix>{x, y});
  CHECK((batch[0] - p).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((batch[1] - m.predict(y)).cwiseAbs().maxCoeff() < 1e-12);

  // Same seed, same parameters.
  CHECK(SequenceModel(soft, 1).params().values() == m.params().values());
  CHECK_FALSE(SequenceModel(soft, 2).params().values() == m.params().values());
}

TEST_CASE("architecture validation") {
  ArchSpec a;
  a.pooling = Pooling::stats;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = ArchSpec{};
  a.recurrent_layers = 0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  CHECK(cell_from_string("gru") == Cell::gru);
  CHECK_THROWS(cell_from_string("transformer"));
}

TEST_CASE("optimizers") {
  Eigen::VectorXd v(2), g(2);
  v << 1.0, -1.0;
  g << 0.5, -2.0;
  Optimizer sgd(OptimizerKind::sgd, 0.1);
  sgd.step(v, g);
  CHECK(v[0] == doctest::Approx(0.95));
  CHECK(v[1] == doctest::Approx(-0.8));

  // First Adam step moves every coordinate by lr * sign(g).
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  Optimizer adam(OptimizerKind::adam, 0.01);
  adam.step(w, g);
  CHECK(w[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("gradient clipping rescales the joint norm") {
  std::vector<Eigen::VectorXd> g{Eigen::VectorXd::Constant(3, 2.0), Eigen::VectorXd::Constant(1, 2.0)};
  CHECK(clip_gradients(g, 2.0) == doctest::Approx(4.0));
  CHECK(std::sqrt(g[0].squaredNorm() + g[1].squaredNorm()) == doctest::Approx(2.0));
  std::vector<Eigen::VectorXd> small{Eigen::VectorXd::Constant(2, 0.1)};
  clip_gradients(small, 2.0);
  CHECK(small[0][0] == 0.1);
}

namespace {

class Quadratic : public Objective {
 public:
  int batches_per_epoch() const override { return 10; }
  Var loss(Tape &tape, std::span<const BoundParams> params, std::mt19937_64 &) override {
    Matrix target(1, 3);
    target << 1.0, -2.0, 0.5;
    return sum(square(sub(params[0][0], tape.constant(target))));
  }
};

}  // namespace

TEST_CASE("fit minimises a simple objective and reports one loss per epoch") {
  ParamSet p;
  p.add("x", 1, 3);
  Quadratic q;
  TrainSpec spec;
  spec.epochs = 30;
  spec.optimizer = OptimizerKind::sgd;
  spec.lr = 0.1;
  ParamSet *const sets[] = {&p};
  int calls = 0;
  const TrainLog log = fit(sets, q, spec, [&](int, double) { ++calls; });
  CHECK(calls == 30);
  CHECK(log.epoch_loss.size() == 30);
  CHECK(log.epoch_loss.back() < 1e-6);
  CHECK(p.values()[1] == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("window starts cover every frame and end on the last one") {
  CHECK(window_starts(5, {10, 2}) == std::vector<long>{0});
  CHECK(window_starts(10, {4, 3}) == std::vector<long>{0, 3, 6});
  CHECK(window_starts(11, {4, 3}) == std::vector<long>{0, 3, 6, 7});
  CHECK_THROWS(window_starts(10, {0, 1}));
}

TEST_CASE("reflect_rows mirrors indices past both ends") {
  Matrix m(3, 1);
  m << 0, 1, 2;
  const Matrix r = reflect_rows(m, -2, 7);
  std::vector<double> got(r.data(), r.data() + r.size());
  CHECK(got == std::vector<double>{2, 1, 0, 1, 2, 1, 0});
}

TEST_CASE("sliding-window scores equal a brute-force overlap-add") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<long> len(1, 300), win(1, 80), step(1, 40);
  for (int trial = 0; trial < 20; ++trial) {
    const long total = len(rng), window = win(rng), hop = std::min(step(rng), window);
    SlidingWindowFeature f;
    f.data = random_matrix(total, 3, rng);
    f.geometry = {0.0, 0.01, 0.025};
    const Matrix proj = random_matrix(3, 2, rng);
    auto score_window = [&](const Matrix &w) {
      Matrix s = (w * proj).array().tanh().matrix();
      for (long i = 0; i < s.rows(); ++i) s.row(i) *= 1.0 + 0.01 * static_cast<double>(i);
      return s;
    };
    const WindowScorer scorer = [&](const std::vector<Matrix> &ws) {
      std::vector<Matrix> out;
      for (const auto &w : ws) out.push_back(score_window(w));
      return out;
    };
    const SlidingWindowFeature got = apply_sliding(scorer, f, {window, hop}, 7);

    Matrix expected;
    if (total < window) {
      Matrix padded(window, 3);
      for (long i = 0; i < window; ++i) {
        long j = i % (2 * (total - 1) == 0 ? 1 : 2 * (total - 1));
        if (j >= total) j = 2 * (total - 1) - j;
        padded.row(i) = f.data.row(total == 1 ? 0 : j);
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
    CAPTURE(total);
    CAPTURE(window);
    CAPTURE(hop);
    REQUIRE(got.data.rows() == expected.rows());
    CHECK(got.data == expected);
    CHECK(got.geometry == f.geometry);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "diarkit_ckpt_test";
  std::filesystem::create_directories(dir);
  ArchSpec arch{5, 2, 3, Cell::gru, Pooling::stats, {4}, 3, Head::embedding};
  SequenceModel m(arch, 9);
  save_checkpoint(dir / "m.ckpt", m, R"({"task":"embedding"})");
  const Checkpoint c = load_checkpoint(dir / "m.ckpt");
  CHECK(c.model.arch() == arch);
  CHECK(c.metadata_json == R"({"task":"embedding"})");
  SequenceModel rounded = m;
  round_to_float(rounded);
  CHECK(c.model.params().values() == rounded.params().values());
  CHECK((c.model.params().values() - m.params().values()).cwiseAbs().maxCoeff() < 1e-6);

  SlidingWindowFeature s;
  s.data = Matrix::Constant(4, 2, 0.25);
  s.geometry = {0.5, 0.02, 0.03};
  save_scores(dir / "s.scores", s, "file1");
  std::string uri;
  const SlidingWindowFeature back = load_scores(dir / "s.scores", &uri);
  CHECK(uri == "file1");
  CHECK(back.geometry == s.geometry);
  CHECK(back.data == s.data);

  CHECK_THROWS_AS(load_checkpoint(dir / "s.scores"), FormatError);
  {
    std::ofstream trunc(dir / "t.ckpt", std::ios::binary);
    trunc << "DKMODEL1";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), FormatError);
  std::filesystem::remove_all(dir);
}
