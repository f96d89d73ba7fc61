#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diarkit/labeling.hpp"

namespace diarkit {

Annotation resegment(const std::string &uri,
                     const SlidingWindowFeature &features,
                     const Annotation &hypothesis, const ResegSpec &spec,
                     const Timeline &overlap) {
  const std::vector<std::string> speakers = hypothesis.labels();
  if (speakers.empty()) throw std::invalid_argument("empty hypothesis");
  if (spec.epochs < 1) throw std::invalid_argument("resegmentation needs epochs >= 1");
  const SlidingWindowGeometry &g = features.geometry;
  const long frames = features.frames();
  const int classes = static_cast<int>(speakers.size()) + 1;

  LabeledFile file;
  file.uri = uri;
  file.features = features;
  file.labels.assign(frames, 0);
  file.speakers.assign(frames, 0);
  for (int k = 0; k < classes - 1; ++k) {
    const Timeline tl = hypothesis.label_timeline(speakers[k]).support();
    std::size_t j = 0;
    for (long i = 0; i < frames; ++i) {
      const double m = g.middle(i);
      while (j < tl.size() && tl[j].end <= m) ++j;
      if (j < tl.size() && tl[j].contains(m)) {
        ++file.speakers[i];
        if (file.labels[i] == 0) file.labels[i] = k + 1;
      }
    }
  }

  nn::ArchSpec arch = spec.arch;
  arch.input_dim = static_cast<int>(features.dims());
  arch.output_dim = classes;
  nn::TrainSpec train = spec.train;
  train.epochs = spec.epochs;
  train.rng_seed = spec.train.rng_seed ^ fnv1a(uri);
  train.validate();

  nn::SequenceModel model(arch, train.rng_seed);
  const long chunk_frames = std::max(1L, std::lround(train.chunk_duration / g.step));
  LabelingOptions opt;
  ChunkObjective objective(model, std::span<const LabeledFile>(&file, 1), opt,
                           chunk_frames, train.batch_size);
  nn::ParamSet *params[] = {&model.params()};
  nn::fit(params, objective, train);

  const SlidingWindowFeature scores = nn::apply_sliding(
      model, features, nn::sliding_spec(train.chunk_duration, g));

  std::vector<std::vector<double>> active(classes,
                                          std::vector<double>(frames, 0.0));
  const Timeline ov = overlap.support();
  std::size_t j = 0;
  for (long i = 0; i < frames; ++i) {
    int best = 0, second = -1;
    for (int c = 1; c < classes; ++c) {
      if (scores.data(i, c) > scores.data(i, best)) best = c;
    }
    for (int c = 0; c < classes; ++c) {
      if (c == best) continue;
      if (second < 0 || scores.data(i, c) > scores.data(i, second)) second = c;
    }
    active[best][i] = 1.0;
    if (best != 0 && second > 0 && !ov.empty()) {
      const double m = g.middle(i);
      while (j < ov.size() && ov[j].end <= m) ++j;
      if (j < ov.size() && ov[j].contains(m)) active[second][i] = 1.0;
    }
  }

  Annotation out(uri);
  const BinarizeParams runs{0.5, 0.0, 0.0};
  for (int c = 1; c < classes; ++c) {
    for (const auto &s : binarize(active[c], g, runs)) out.add(s, speakers[c - 1]);
  }
  return out;
}

}  // namespace diarkit
