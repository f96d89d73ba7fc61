#include <doctest.h>

#include <fstream>
#include <sstream>

#include "diarkit/corpus.hpp"
#include "diarkit/error.hpp"
#include "diarkit/labeling.hpp"
#include "diarkit/rttm.hpp"

using namespace diarkit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthSpec small_spec() {
  SynthSpec s;
  s.n_speakers = 4;
  s.n_train = 2;
  s.n_dev = 1;
  s.n_eval = 1;
  s.file_duration = 8.0;
  s.n_noise_files = 1;
  s.noise_duration = 1.0;
  s.rng_seed = 17;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("corpus generation is byte-identical across runs and worker counts") {
  TempDir a("diarkit_corpus_a"), b("diarkit_corpus_b");
  const ProtocolSpec pa = generate_corpus(small_spec(), a.path, 1);
  generate_corpus(small_spec(), b.path, 2);
  CHECK(pa.split("train").size() == 2);
  CHECK(pa.split("dev").size() == 1);
  CHECK(pa.split("eval").size() == 1);
  int compared = 0;
  for (const auto &e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path);
    REQUIRE(fs::exists(b.path / rel));
    CHECK(slurp(e.path()) == slurp(b.path / rel));
    ++compared;
  }
  CHECK(compared >= 4 * 3 + 3);

  const ProtocolSpec loaded = load_protocol(a.path / "protocol.json");
  CHECK(loaded.split("dev").front().uri == pa.split("dev").front().uri);
  const CorpusFile f = load_file(loaded.split("train").front());
  CHECK(f.waveform.duration() == doctest::Approx(8.0));
  CHECK_FALSE(f.reference.empty());
  CHECK(f.uem.duration() == doctest::Approx(8.0));
  CHECK(synth_spec_from_json(slurp(a.path / "synth.json")).rng_seed == 17);
}

TEST_CASE("speech regions carry energy and silence does not") {
  SynthSpec s = small_spec();
  s.noise_level = 0.0;
  const Annotation a = synth_conversation(s, "x", 5);
  const Waveform w = render(s, make_voices(s), a, 6);
  const Timeline speech = a.speech();
  const long hop = 160;
  int voiced = 0, silent = 0;
  for (long first = 0; first + hop <= w.size(); first += hop) {
    const Segment frame{first / 16000.0, (first + hop) / 16000.0};
    const Segment padded{frame.start - 0.02, frame.end + 0.02};
    bool inside = false, touches = false;
    for (const auto &seg : speech) {
      inside = inside || (seg.start <= padded.start && padded.end <= seg.end);
      touches = touches || seg.overlaps(frame);
    }
    const std::vector<double> chunk(w.samples.begin() + first, w.samples.begin() + first + hop);
    const double e = rms(chunk);
    if (inside) {
      CHECK(e > 1e-3);
      ++voiced;
    } else if (!touches) {
      CHECK(e == 0.0);
      ++silent;
    }
  }
  CHECK(voiced > 100);
  CHECK(silent > 0);
}

TEST_CASE("conversations respect the turn settings") {
  SynthSpec s = small_spec();
  s.file_duration = 60.0;
  s.overlap_probability = 0.0;
  for (unsigned long long seed = 0; seed < 10; ++seed) {
    const Annotation a = synth_conversation(s, "x", seed);
    const SlidingWindowGeometry g;
    const long frames = g.frames_in(s.file_duration);
    const FrameLabels osd = osd_labels(a, g, frames);
    CHECK(std::count(osd.labels.begin(), osd.labels.end(), 1) == 0);
    CHECK(a.labels().size() >= 2);
    CHECK(a.labels().size() <= 4);
    for (const auto &t : a.tracks()) {
      CHECK(t.segment.duration() >= s.turn_min - 1e-9);
      CHECK(t.segment.end <= s.file_duration);
      CHECK(std::abs(t.segment.start * 1000.0 - std::round(t.segment.start * 1000.0)) < 1e-6);
    }
  }
  s.overlap_probability = 0.5;
  int overlapped = 0;
  for (unsigned long long seed = 0; seed < 10; ++seed) {
    const Annotation a = synth_conversation(s, "x", seed);
    const SlidingWindowGeometry g;
    const FrameLabels osd = osd_labels(a, g, g.frames_in(s.file_duration));
    overlapped += std::count(osd.labels.begin(), osd.labels.end(), 1);
  }
  CHECK(overlapped > 0);
}

TEST_CASE("synth spec validation and json round trip") {
  SynthSpec s = small_spec();
  s.turn_mean = 2.5;
  const SynthSpec back = synth_spec_from_json(synth_spec_to_json(s));
  CHECK(back.turn_mean == 2.5);
  CHECK(back.n_train == 2);
  s.pause_probability = 0.8;
  s.overlap_probability = 0.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK_THROWS(synth_spec_from_json("{\"n_speakers\": \"six\"}"));
}

TEST_CASE("protocols reject shared uris and missing files") {
  TempDir d("diarkit_protocol_test");
  const ProtocolSpec p = generate_corpus(small_spec(), d.path, 1);

  ProtocolSpec shared = p;
  shared.splits["eval"].push_back(p.split("train").front());
  try {
    shared.validate();
    FAIL("no exception");
  } catch (const ValidationError &e) {
    CHECK(std::string(e.what()).find(p.split("train").front().uri) != std::string::npos);
  }

  ProtocolSpec missing = p;
  missing.splits["dev"].front().wav = d.path / "wav" / "nope.wav";
  CHECK_THROWS_AS(missing.validate(), ValidationError);
  CHECK_THROWS_AS(p.split("test"), ValidationError);

  save_protocol(d.path / "copy.json", p);
  const ProtocolSpec again = load_protocol(d.path / "copy.json");
  CHECK(again.split("eval").front().wav == p.split("eval").front().wav);
  CHECK_THROWS_AS(load_protocol(d.path / "absent.json"), ValidationError);
}
