#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "diarkit/embedding.hpp"
#include "diarkit/error.hpp"
#include "diarkit/metrics.hpp"

namespace diarkit {

Eigen::RowVectorXd embed(const nn::SequenceModel &m, const nn::Matrix &chunk) {
  if (m.arch().head != nn::Head::embedding) {
    throw std::invalid_argument("embed: model has no embedding head");
  }
  return m.predict(chunk).row(0);
}

Eigen::RowVectorXd embed_span(const nn::SequenceModel &m,
                              const nn::Matrix &features, long first, long n,
                              long chunk_frames) {
  if (n < 1 || first < 0 || first + n > features.rows()) {
    throw std::invalid_argument("embed_span: span outside the features");
  }
  if (n < chunk_frames) {
    return embed(m, nn::reflect_rows(features.middleRows(first, n), 0,
                                     chunk_frames));
  }
  const auto starts = nn::window_starts(n, {chunk_frames, chunk_frames});
  std::vector<nn::Matrix> chunks;
  for (long s : starts) chunks.push_back(features.middleRows(first + s, chunk_frames));
  const auto out = m.predict(chunks);
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(out.front().cols());
  for (const auto &e : out) sum += e.row(0);
  return sum / sum.norm();
}

namespace {

std::map<std::string, std::vector<Segment>> lone_regions(const Annotation &ref,
                                                         double min_duration) {
  std::map<std::string, std::vector<Segment>> out;
  const auto labels = ref.labels();
  for (const auto &l : labels) {
    std::vector<Segment> segs;
    for (const auto &o : labels) {
      if (o == l) continue;
      for (const auto &s : ref.label_timeline(o)) segs.push_back(s);
    }
    const Timeline alone =
        difference(ref.label_timeline(l), Timeline(std::move(segs)));
    for (const auto &s : alone) {
      if (s.duration() >= min_duration) out[l].push_back(s);
    }
  }
  return out;
}

// First frame whose middle is >= t.
long first_frame_at(const SlidingWindowGeometry &g, double t) {
  return std::max(
      0L, static_cast<long>(std::ceil((t - g.start - 0.5 * g.window) / g.step - 1e-9)));
}

}  // namespace

std::map<std::string, std::vector<SpeakerRegion>> single_speaker_regions(
    std::span<const SpeakerFile> files, double min_duration) {
  std::map<std::string, std::vector<SpeakerRegion>> out;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto &[label, segs] : lone_regions(files[f].reference, min_duration)) {
      for (const auto &s : segs) out[label].push_back({f, s});
    }
  }
  return out;
}

EmbeddingObjective::EmbeddingObjective(const nn::SequenceModel &model,
                                       EmbeddingLoss &loss,
                                       std::span<const SpeakerFile> files,
                                       const EmbeddingOptions &opt,
                                       long chunk_frames)
    : model_(model), loss_(loss), files_(files), opt_(opt),
      chunk_frames_(chunk_frames) {
  if (files_.empty()) throw std::invalid_argument("empty training set");
  if (opt_.speakers_per_batch < 1 || opt_.chunks_per_speaker < 1) {
    throw std::invalid_argument("embedding batch must hold >= 1 chunk");
  }
  const SlidingWindowGeometry &g = files_.front().features.geometry;
  const double min_duration = static_cast<double>(chunk_frames_) * g.step;
  for (auto &[label, regions] : single_speaker_regions(files_, min_duration)) {
    speakers_.push_back(label);
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto &r : regions) {
      acc += r.segment.duration();
      cum.push_back(acc);
    }
    total_duration_ += acc;
    regions_.push_back(std::move(regions));
    cumulative_.push_back(std::move(cum));
  }
  if (speakers_.empty()) {
    throw std::invalid_argument("no single-speaker region long enough for a chunk");
  }
}

int EmbeddingObjective::batches_per_epoch() const {
  const double per_batch = static_cast<double>(chunk_frames_) *
                           files_.front().features.geometry.step *
                           std::min<int>(opt_.speakers_per_batch, speakers_.size()) *
                           opt_.chunks_per_speaker;
  return std::max(1, static_cast<int>(std::ceil(total_duration_ / per_batch)));
}

nn::Var EmbeddingObjective::loss(nn::Tape &tape,
                                 std::span<const nn::BoundParams> params,
                                 std::mt19937_64 &rng) {
  std::vector<int> order(speakers_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order[i - 1], order[j]);
  }
  const int n = std::min<int>(opt_.speakers_per_batch, speakers_.size());
  std::vector<nn::Matrix> chunks;
  last_labels_.clear();
  for (int k = 0; k < n; ++k) {
    const int spk = order[k];
    const auto &cum = cumulative_[spk];
    for (int c = 0; c < opt_.chunks_per_speaker; ++c) {
      const double u =
          std::uniform_real_distribution<double>(0.0, cum.back())(rng);
      const std::size_t r = std::min<std::size_t>(
          std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), cum.size() - 1);
      const SpeakerRegion &region = regions_[spk][r];
      const SlidingWindowFeature &feat = files_[region.file].features;
      const SlidingWindowGeometry &g = feat.geometry;
      const long lo = first_frame_at(g, region.segment.start);
      const long hi =
          std::min(feat.frames(), first_frame_at(g, region.segment.end)) - 1;
      const long room = hi - lo + 1 - chunk_frames_;
      const long start =
          room > 0 ? lo + std::uniform_int_distribution<long>(0, room)(rng) : lo;
      chunks.push_back(nn::reflect_rows(feat.data, start, chunk_frames_));
      last_labels_.push_back(spk);
    }
  }
  const long batch = static_cast<long>(chunks.size());
  const nn::Var e = model_.forward(tape, params[0], nn::stack_time_major(chunks),
                                   chunk_frames_, batch);
  last_embeddings_ = e.value();
  return loss_(tape, e, last_labels_, params.size() > 1 ? &params[1] : nullptr);
}

void EmbeddingObjective::after_step() {
  loss_.update_centers(last_embeddings_, last_labels_);
}

TrainedEmbedding train_embedding(std::span<const SpeakerFile> files,
                                 const EmbeddingOptions &opt,
                                 const nn::ArchSpec &arch,
                                 const nn::TrainSpec &spec,
                                 const nn::EpochCallback &on_epoch) {
  if (files.empty()) throw std::invalid_argument("empty training set");
  if (arch.head != nn::Head::embedding) {
    throw std::invalid_argument("embedding training needs an embedding head");
  }
  if (arch.input_dim != files.front().features.dims()) {
    throw std::invalid_argument("arch input_dim does not match features");
  }
  spec.validate();
  TrainedEmbedding out;
  out.model = nn::SequenceModel(arch, spec.rng_seed);
  const long chunk_frames = std::max(
      1L, std::lround(spec.chunk_duration / files.front().features.geometry.step));
  const auto regions = single_speaker_regions(
      files, static_cast<double>(chunk_frames) * files.front().features.geometry.step);
  out.loss = EmbeddingLoss(opt.loss, arch.output_dim,
                           static_cast<int>(regions.size()), spec.rng_seed + 1);
  EmbeddingObjective objective(out.model, out.loss, files, opt, chunk_frames);
  out.speakers = objective.speakers();
  std::vector<nn::ParamSet *> params{&out.model.params()};
  if (out.loss.has_params()) params.push_back(&out.loss.params());
  out.log = nn::fit(params, objective, spec, on_epoch);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Trial> parse_trials(const std::string &text,
                                const std::string &source) {
  std::vector<Trial> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string w; ls >> w;) f.push_back(w);
    if (f.empty() || f[0][0] == '#') continue;
    if (f.size() != 7) {
      throw ParseError(source, number,
                       "expected 7 fields, got " + std::to_string(f.size()));
    }
    Trial t;
    try {
      if (f[0] != "0" && f[0] != "1") throw std::invalid_argument("label");
      t.target = f[0] == "1";
      t.wav_a = f[1];
      t.start_a = std::stod(f[2]);
      t.duration_a = std::stod(f[3]);
      t.wav_b = f[4];
      t.start_b = std::stod(f[5]);
      t.duration_b = std::stod(f[6]);
    } catch (const std::exception &) {
      throw ParseError(source, number, "malformed trial");
    }
    if (t.duration_a <= 0.0 || t.duration_b <= 0.0) {
      throw ParseError(source, number, "non-positive duration");
    }
    out.push_back(t);
  }
  return out;
}

std::vector<Trial> read_trials(const std::filesystem::path &path) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << file.rdbuf();
  return parse_trials(ss.str(), path.string());
}

std::string format_trials(const std::vector<Trial> &trials) {
  std::string out;
  char buf[64];
  for (const auto &t : trials) {
    out += t.target ? "1 " : "0 ";
    out += t.wav_a;
    std::snprintf(buf, sizeof buf, " %.3f %.3f ", t.start_a, t.duration_a);
    out += buf;
    out += t.wav_b;
    std::snprintf(buf, sizeof buf, " %.3f %.3f\n", t.start_b, t.duration_b);
    out += buf;
  }
  return out;
}

void write_trials(const std::filesystem::path &path,
                  const std::vector<Trial> &trials) {
  std::ofstream file(path);
  if (!file) throw Error("cannot write " + path.string());
  file << format_trials(trials);
}

std::vector<Trial> generate_trials(std::span<const TrialSource> sources,
                                   int count, double duration,
                                   unsigned long long seed) {
  struct Window {
    std::size_t source;
    Segment region;
  };
  std::map<std::string, std::vector<Window>> by_speaker;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (const auto &[label, segs] : lone_regions(sources[i].reference, duration)) {
      for (const auto &s : segs) by_speaker[label].push_back({i, s});
    }
  }
  std::vector<const std::vector<Window> *> speakers;
  for (const auto &[label, w] : by_speaker) speakers.push_back(&w);
  if (speakers.size() < 2) {
    throw std::invalid_argument("trials need >= 2 speakers with long enough turns");
  }

  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<Window> &w) {
    const Window &r =
        w[std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng)];
    // Millisecond grid so that the written list reads back identically.
    const long lo = static_cast<long>(std::ceil(r.region.start * 1000.0 - 1e-6));
    const long hi = static_cast<long>(
        std::floor((r.region.end - duration) * 1000.0 + 1e-6));
    const long ms = hi > lo ? std::uniform_int_distribution<long>(lo, hi)(rng) : lo;
    return std::pair{r.source, ms / 1000.0};
  };
  auto any = [&] {
    return std::uniform_int_distribution<std::size_t>(0, speakers.size() - 1)(rng);
  };

  std::vector<Trial> out;
  for (int k = 0; k < count; ++k) {
    Trial t;
    t.target = k % 2 == 0;
    const std::size_t sa = any();
    std::size_t sb = sa;
    if (!t.target) {
      while (sb == sa) sb = any();
    }
    const auto [fa, start_a] = pick(*speakers[sa]);
    auto [fb, start_b] = pick(*speakers[sb]);
    for (int retry = 0; t.target && retry < 20 && fa == fb &&
                        std::abs(start_a - start_b) < duration;
         ++retry) {
      std::tie(fb, start_b) = pick(*speakers[sb]);
    }
    t.wav_a = sources[fa].wav;
    t.start_a = start_a;
    t.duration_a = duration;
    t.wav_b = sources[fb].wav;
    t.start_b = start_b;
    t.duration_b = duration;
    out.push_back(t);
  }
  return out;
}

VerificationResult verify_trials(const nn::SequenceModel &model,
                                 const std::vector<Trial> &trials,
                                 const MfccConfig &mfcc_cfg, long chunk_frames) {
  std::map<std::string, SlidingWindowFeature> cache;
  auto features = [&](const std::string &wav) -> const SlidingWindowFeature & {
    auto it = cache.find(wav);
    if (it == cache.end()) {
      SlidingWindowFeature f = mfcc(read_wav(wav), mfcc_cfg);
      f.data = normalize(f.data, feature_stats(f.data));
      it = cache.emplace(wav, std::move(f)).first;
    }
    return it->second;
  };
  auto side = [&](const std::string &wav, double start, double dur) {
    const SlidingWindowFeature &f = features(wav);
    const long first = std::min(first_frame_at(f.geometry, start), f.frames() - 1);
    const long n = std::clamp(std::lround(dur / f.geometry.step), 1L,
                              f.frames() - first);
    return embed_span(model, f.data, first, n, chunk_frames);
  };

  VerificationResult r;
  std::vector<double> tar, non;
  for (const auto &t : trials) {
    const double s = side(t.wav_a, t.start_a, t.duration_a)
                         .dot(side(t.wav_b, t.start_b, t.duration_b));
    r.scores.push_back(s);
    (t.target ? tar : non).push_back(s);
  }
  r.eer = eer(tar, non);
  return r;
}

}  // namespace diarkit
