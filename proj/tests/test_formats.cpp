#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "timbre/errors.hpp"
#include "timbre/fixture.hpp"
#include "timbre/pipeline.hpp"
#include "timbre/rng.hpp"

using namespace timbre;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("frame store: binary + manifest round trip") {
  FrameStore store;
  store.spec = TransformSpec::from_name("nsgt-mel");
  store.norm_constant = 7.5;
  store.seed = 99;
  store.frames.resize(3, 5);
  CounterRng rng(1);
  rng.fill_uniform(store.frames, 0.0, 1.0);
  store.meta = {{"a", "c1", "train"}, {"b", "c1", "test"}, {"c", "c2", "train"}};

  const std::string path = "/tmp/timbre_store_test.tsf";
  store.save(path);
  const FrameStore back = FrameStore::load(path);
  CHECK(back.spec == store.spec);
  CHECK(back.norm_constant == 7.5);
  CHECK(back.seed == 99);
  CHECK((back.frames - store.frames).cwiseAbs().maxCoeff() == 0.0f);
  REQUIRE(back.meta.size() == 3);
  CHECK(back.meta[1].split == "test");
  CHECK(back.class_list() == std::vector<std::string>{"c1", "c2"});
  CHECK(back.split_indices("train") == std::vector<int>{0, 2});
  fs::remove(path);
  fs::remove(path + ".json");

  CHECK_THROWS_AS(FrameStore::load("/tmp/definitely_missing.tsf"), IoError);
}

TEST_CASE("fixture: deterministic corpus with coherent ratings") {
  FixtureSpec spec;
  spec.classes = 4;
  spec.samples_per_class = 2;
  spec.seed = 5;
  spec.duration_s = 0.45;

  const auto classes = fixture_classes(spec);
  REQUIRE(classes.size() == 4);
  CHECK(classes[0].name == "inst00");

  const auto ratings = fixture_ratings(spec, classes);
  // subjects * C(4,2) pairs
  CHECK(ratings.size() == 5 * 6);
  for (const auto& r : ratings) {
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
    CHECK(r.instrument_a != r.instrument_b);
  }

  // same seed, same tone samples
  const AudioBuffer a = fixture_tone(classes[1], 220.0, 0.5, 0.2, 22050.0);
  const AudioBuffer b = fixture_tone(classes[1], 220.0, 0.5, 0.2, 22050.0);
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.samples.cwiseAbs().maxCoeff() <= 0.55);

  CHECK_THROWS_AS(fixture_classes(FixtureSpec{.classes = 2}), FormatError);
}

TEST_CASE("fixture + analyze: end-to-end store build is deterministic") {
  TempDir dir("timbre_fixture_test");
  FixtureSpec fspec;
  fspec.classes = 3;
  fspec.samples_per_class = 4;
  fspec.seed = 11;
  fspec.duration_s = 0.4;
  generate_fixture(dir.path.string(), fspec);

  CHECK(fs::exists(dir.path / "ratings.csv"));
  CHECK(fs::exists(dir.path / "fixture.json"));
  CHECK(fs::exists(dir.path / "audio" / "inst00" / "inst00_00.wav"));

  AnalyzeOptions opt;
  opt.spec = TransformSpec::from_name("nsgt-erb");
  opt.frame_ms = 200.0;
  opt.seed = 21;
  opt.threads = 2;
  const FrameStore store = analyze_corpus(dir.path.string(), opt);
  CHECK(store.count() == 12);
  CHECK(store.frame_len() == 400);
  CHECK(store.norm_constant > 0.0);
  // normalized corpus peaks at exactly 1
  CHECK(store.frames.maxCoeff() == doctest::Approx(1.0).epsilon(1e-6));
  // every class present in both splits
  for (const auto& cls : store.class_list()) {
    int train = 0, test = 0;
    for (const auto& m : store.meta)
      if (m.class_label == cls) (m.split == "train" ? train : test) += 1;
    CHECK(train == 3);
    CHECK(test == 1);
  }

  // byte-identical rerun, single thread vs two threads
  const std::string p1 = (dir.path / "store1.tsf").string();
  const std::string p2 = (dir.path / "store2.tsf").string();
  store.save(p1);
  AnalyzeOptions opt1 = opt;
  opt1.threads = 1;
  analyze_corpus(dir.path.string(), opt1).save(p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
  CHECK(file_bytes(p1 + ".json") == file_bytes(p2 + ".json"));
}

TEST_CASE("target_from_csv on the synthetic ratings") {
  TempDir dir("timbre_target_test");
  FixtureSpec fspec;
  fspec.classes = 5;
  fspec.samples_per_class = 1;
  fspec.seed = 31;
  const auto classes = fixture_classes(fspec);
  const auto ratings = fixture_ratings(fspec, classes);
  {
    std::ofstream csv(dir.path / "ratings.csv");
    csv << "study,subject,instrument_a,instrument_b,value,scale_min,scale_max\n";
    for (const auto& r : ratings)
      csv << r.study_id << "," << r.subject_id << "," << r.instrument_a << ","
          << r.instrument_b << "," << r.value << ",0,1\n";
  }
  const TimbreTarget target =
      target_from_csv((dir.path / "ratings.csv").string(), 3);
  CHECK(target.instruments.size() == 5);
  CHECK(target.coords.rows() == 5);
  CHECK(target.coords.cols() == 3);
  CHECK(target.coords.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  // symmetric zero-diagonal source in [0,1]
  const auto& m = target.source_matrix.values;
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.maxCoeff() <= 1.0);
}

TEST_CASE("report: metrics line up with a store and checkpoint") {
  TempDir dir("timbre_report_test");
  FixtureSpec fspec;
  fspec.classes = 3;
  fspec.samples_per_class = 4;
  fspec.seed = 41;
  fspec.duration_s = 0.4;
  generate_fixture(dir.path.string(), fspec);
  AnalyzeOptions opt;
  opt.spec = TransformSpec::from_name("nsgt-erb");
  opt.seed = 42;
  const FrameStore store = analyze_corpus(dir.path.string(), opt);
  const TimbreTarget target =
      target_from_csv((dir.path / "ratings.csv").string(), 2);

  TrainConfig cfg;
  cfg.latent_dims = 4;
  cfg.hidden_units = 12;
  cfg.hidden_layers = 2;
  cfg.stage1_epochs = 5;
  cfg.stage2_epochs = 2;
  cfg.warmup_epochs = 2;
  cfg.batch_size = 6;
  cfg.seed = 43;
  cfg.ll_samples = 4;
  cfg.ll_every = 0;
  const TrainResult tr = train_vae(store, &target, cfg);

  Checkpoint ckpt;
  ckpt.model = tr.model;
  ckpt.config = cfg;
  ckpt.spec_hash = store.spec.hash();
  ckpt.norm_constant = store.norm_constant;
  ckpt.class_names = store.class_list();
  const ReportResult r = report(ckpt, store, &target);
  CHECK(std::isfinite(r.test_mse));
  CHECK(std::isfinite(r.test_ll));
  CHECK(std::isfinite(r.dist_kl));
  CHECK(r.dist_kl >= 0.0);
  CHECK(r.classes.size() == 3);
  CHECK(r.centroids_pca.rows() == 3);
  save_report_json((dir.path / "report.json").string(), r);
  CHECK(fs::exists(dir.path / "report.json"));

  // wrong transform is rejected
  Checkpoint bad = ckpt;
  bad.spec_hash = 1;
  CHECK_THROWS_AS(report(bad, store, &target), PlanMismatch);
}

TEST_CASE("frame_for_model normalizes by the store constant") {
  TempDir dir("timbre_ffm_test");
  FixtureSpec fspec;
  fspec.classes = 3;
  fspec.samples_per_class = 2;
  fspec.seed = 51;
  fspec.duration_s = 0.4;
  generate_fixture(dir.path.string(), fspec);
  AnalyzeOptions opt;
  opt.spec = TransformSpec::from_name("nsgt-mel");
  opt.seed = 52;
  const FrameStore store = analyze_corpus(dir.path.string(), opt);

  const std::string wav =
      (dir.path / "audio" / "inst01" / "inst01_00.wav").string();
  const Eigen::VectorXf frame = frame_for_model(wav, store, 200.0);
  CHECK(frame.size() == store.frame_len());
  // that exact file is in the corpus, so its frame exists in the store
  double best = 1e9;
  for (Eigen::Index r = 0; r < store.count(); ++r)
    best = std::min(best, double((store.frames.row(r).transpose() - frame)
                                     .cwiseAbs()
                                     .maxCoeff()));
  CHECK(best < 1e-6);
}
