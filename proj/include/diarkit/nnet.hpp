#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "diarkit/features.hpp"
#include "diarkit/tape.hpp"

namespace diarkit::nn {

// Flat parameter vector with named, column-major matrix views.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    long rows = 0;
    long cols = 0;
    long offset = 0;
  };

  // Returns the index of the new entry; values are zero-initialised.
  int add(std::string name, long rows, long cols);

  const std::vector<Entry> &entries() const { return entries_; }
  int index(const std::string &name) const;  // throws if unknown
  long size() const { return static_cast<long>(values_.size()); }

  Eigen::Map<Matrix> view(int i);
  Eigen::Map<const Matrix> view(int i) const;
  Eigen::Map<Matrix> view(const std::string &name) { return view(index(name)); }

  Eigen::VectorXd &values() { return values_; }
  const Eigen::VectorXd &values() const { return values_; }

 private:
  std::vector<Entry> entries_;
  Eigen::VectorXd values_;
};

// Parameters of a ParamSet placed on a tape as differentiable leaves.
class BoundParams {
 public:
  BoundParams(Tape &tape, const ParamSet &params, bool requires_grad = true);
  const Var &operator[](int i) const { return vars_[i]; }
  const Var &operator[](const std::string &name) const {
    return vars_[params_->index(name)];
  }
  // Gradient of every parameter, flattened like ParamSet::values().
  Eigen::VectorXd gradient() const;

 private:
  Tape *tape_;
  const ParamSet *params_;
  std::vector<Var> vars_;
};

enum class Cell { lstm, gru, tanh };
enum class Pooling { none, stats };
enum class Head { softmax, embedding };

std::string to_string(Cell c);
std::string to_string(Pooling p);
std::string to_string(Head h);
Cell cell_from_string(const std::string &s);
Pooling pooling_from_string(const std::string &s);
Head head_from_string(const std::string &s);

// Bidirectional recurrent stack, optional temporal statistics pooling,
// tanh feed-forward layers and a final linear layer.
struct ArchSpec {
  int input_dim = 57;
  int recurrent_layers = 1;
  int recurrent_units = 32;
  Cell cell = Cell::lstm;
  Pooling pooling = Pooling::none;
  std::vector<int> ff_layers{32};
  int output_dim = 2;
  Head head = Head::softmax;

  void validate() const;  // throws std::invalid_argument
  int gates() const { return cell == Cell::lstm ? 4 : cell == Cell::gru ? 3 : 1; }
  friend bool operator==(const ArchSpec &, const ArchSpec &) = default;
};

class SequenceModel {
 public:
  SequenceModel() = default;
  // Parameters drawn with Glorot-uniform initialisation from `seed`.
  SequenceModel(ArchSpec arch, unsigned long long seed);

  const ArchSpec &arch() const { return arch_; }
  ParamSet &params() { return params_; }
  const ParamSet &params() const { return params_; }

  // Recurrent encoder output for a t-major batch X [(T*B) x D]:
  // [(T*B) x 2H], forward direction in the left half.
  Var encode(Tape &tape, const BoundParams &p, const Matrix &x, long steps,
             long batch) const;
  // Softmax head: logits [(T*B) x K]. Embedding head: unit rows [B x K].
  Var forward(Tape &tape, const BoundParams &p, const Matrix &x, long steps,
              long batch) const;

  // Inference on one sequence [T x D]: per-frame class probabilities
  // [T x K] (softmax head) or a [1 x K] unit-norm embedding.
  Matrix predict(const Matrix &sequence) const;
  // Same for a batch of equally long sequences.
  std::vector<Matrix> predict(const std::vector<Matrix> &sequences) const;

 private:
  void build_params();

  ArchSpec arch_;
  ParamSet params_;
};

// t-major stacking of equally long sequences: row t*B + b.
Matrix stack_time_major(const std::vector<Matrix> &sequences);

// ---------------------------------------------------------------------------
// Training.

enum class OptimizerKind { sgd, adam };
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string &s);

struct TrainSpec {
  double chunk_duration = 2.0;
  int batch_size = 32;
  int epochs = 10;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 0.01;
  double clip_norm = 5.0;
  unsigned long long rng_seed = 0;
  // Batches per epoch; 0 lets the data source decide.
  int batches_per_epoch = 0;

  void validate() const;
};

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr);
  void step(Eigen::VectorXd &values, const Eigen::VectorXd &grad);

 private:
  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

// One mini-batch objective. `params` are bound in the order they were
// handed to fit().
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int batches_per_epoch() const = 0;
  virtual Var loss(Tape &tape, std::span<const BoundParams> params,
                   std::mt19937_64 &rng) = 0;
  // Called after each optimizer step.
  virtual void after_step() {}
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Rescales the gradients so that their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(std::span<Eigen::VectorXd> grads, double max_norm);

// Mini-batch training of every ParamSet in `params` jointly.
TrainLog fit(std::span<ParamSet *const> params, Objective &objective,
             const TrainSpec &spec, const EpochCallback &on_epoch = {});

// ---------------------------------------------------------------------------
// Sliding-window inference.

// Scores a batch of equally long windows [n x D] -> [n x K].
using WindowScorer =
    std::function<std::vector<Matrix>(const std::vector<Matrix> &)>;

struct SlidingSpec {
  long window_frames = 200;
  long step_frames = 20;
};

// Default step: 10% of the window, at least one frame.
SlidingSpec sliding_spec(double window_duration,
                         const SlidingWindowGeometry &frames);

// Window start frames: 0, step, 2*step, ... plus a final window ending on
// the last frame when the regular grid does not reach it.
std::vector<long> window_starts(long total_frames, const SlidingSpec &spec);

// Scores every window and averages, per frame, the scores of all windows
// covering it. Inputs shorter than one window are reflect-padded.
SlidingWindowFeature apply_sliding(const WindowScorer &scorer,
                                   const SlidingWindowFeature &features,
                                   const SlidingSpec &spec,
                                   long batch_size = 64);
SlidingWindowFeature apply_sliding(const SequenceModel &model,
                                   const SlidingWindowFeature &features,
                                   const SlidingSpec &spec);

// Rows [first, first + n) with indices past either end reflected.
Matrix reflect_rows(const Matrix &data, long first, long n);

// ---------------------------------------------------------------------------
// Binary files.
//
// Layout (all integers little-endian):
//   8 bytes  magic ("DKMODEL1" or "DKSCORE1")
//   u32      header length H
//   H bytes  JSON header
//   u64      value count N
//   N x f32  values

struct Checkpoint {
  SequenceModel model;
  // Free-form settings saved alongside the model (task, chunk duration, ...).
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::filesystem::path &path, const SequenceModel &m,
                     const std::string &metadata_json = "{}");
Checkpoint load_checkpoint(const std::filesystem::path &path);

// Score matrix with geometry header; values stored row-major.
void save_scores(const std::filesystem::path &path,
                 const SlidingWindowFeature &scores, const std::string &uri);
SlidingWindowFeature load_scores(const std::filesystem::path &path,
                                 std::string *uri = nullptr);

// Round-trips every parameter through float32, as a checkpoint would.
void round_to_float(SequenceModel &m);

}  // namespace diarkit::nn
