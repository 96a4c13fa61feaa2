#include "timbre/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "timbre/errors.hpp"
#include "timbre/regularizer.hpp"
#include "timbre/rng.hpp"

namespace timbre {

namespace fs = std::filesystem;

namespace {

struct CorpusEntry {
  std::string path;
  std::string class_label;
  std::string source_id;
};

std::vector<CorpusEntry> enumerate_corpus(const std::string& corpus_dir) {
  fs::path root = fs::path(corpus_dir) / "audio";
  if (!fs::is_directory(root)) root = corpus_dir;
  if (!fs::is_directory(root))
    throw IoError("corpus directory not found: " + corpus_dir);

  std::vector<CorpusEntry> entries;
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.is_regular_file() && f.path().extension() == ".wav")
        files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      entries.push_back({f.string(), dir.filename().string(),
                         f.stem().string()});
  }
  if (entries.empty()) throw IoError("no WAV files under " + corpus_dir);
  return entries;
}

/// Shared per-length transform cache; plan design is the expensive part.
class TransformCache {
 public:
  explicit TransformCache(const TransformSpec& spec) : spec_(spec) {}

  const SpectralTransform& for_length(long len) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(len);
    if (it == cache_.end())
      it = cache_.emplace(len, std::make_shared<SpectralTransform>(spec_, len))
               .first;
    return *it->second;
  }

 private:
  TransformSpec spec_;
  std::mutex mutex_;
  std::map<long, std::shared_ptr<SpectralTransform>> cache_;
};

SpectralFrame analyze_one(const std::string& path, TransformCache& cache,
                          const TransformSpec& spec, double frame_ms) {
  AudioBuffer audio = resample(load_wav(path), spec.sample_rate);
  long len = audio.samples.size();
  if (spec.kind == TransformKind::Nsgt) {
    const long padded = next_fast_len(len);
    if (padded != len) {
      audio.samples.conservativeResize(padded);
      audio.samples.tail(padded - len).setZero();
      len = padded;
    }
  }
  const SpectralTransform& tf = cache.for_length(len);
  return extract_frame(tf.forward(audio), frame_ms);
}

}  // namespace

FrameStore analyze_corpus(const std::string& corpus_dir,
                          const AnalyzeOptions& options) {
  options.spec.validate();
  const auto entries = enumerate_corpus(corpus_dir);
  TransformCache cache(options.spec);

  std::vector<SpectralFrame> frames(entries.size());
  std::vector<char> ok(entries.size(), 0);
  std::vector<std::string> failures;
  std::mutex failure_mutex;

  int n_threads = options.threads > 0
                      ? options.threads
                      : int(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, int(entries.size())));
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= entries.size()) return;
      try {
        frames[i] = analyze_one(entries[i].path, cache, options.spec,
                                options.frame_ms);
        frames[i].class_label = entries[i].class_label;
        frames[i].source_id = entries[i].source_id;
        ok[i] = 1;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failures.push_back(entries[i].path + ": " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& f : failures) std::cerr << "analyze: skipped " << f << "\n";
  if (double(failures.size()) >
      options.max_failure_fraction * double(entries.size()))
    throw Error(std::to_string(failures.size()) + " of " +
                std::to_string(entries.size()) + " corpus files failed");

  std::vector<SpectralFrame> good;
  std::vector<const CorpusEntry*> good_entries;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (ok[i]) {
      good.push_back(std::move(frames[i]));
      good_entries.push_back(&entries[i]);
    }
  const double norm = corpus_normalize(good);

  // stratified split, deterministic in the seed and the sorted file order
  std::map<std::string, std::vector<int>> by_class;
  for (int i = 0; i < int(good.size()); ++i)
    by_class[good[size_t(i)].class_label].push_back(i);
  std::vector<std::string> split(good.size(), "train");
  CounterRng split_rng(options.seed, CounterRng::tag("split"));
  for (auto& [label, members] : by_class) {
    split_rng.shuffle(members);
    const int n_test = std::max(
        1, int(std::llround((1.0 - options.train_fraction) * members.size())));
    if (int(members.size()) <= n_test)
      throw Error("class '" + label + "' has too few samples to split");
    for (int k = 0; k < n_test; ++k) split[size_t(members[size_t(k)])] = "test";
  }

  FrameStore store;
  store.spec = options.spec;
  store.norm_constant = norm;
  store.seed = options.seed;
  store.frames.resize(Eigen::Index(good.size()),
                      good.front().magnitudes.size());
  for (std::size_t i = 0; i < good.size(); ++i) {
    store.frames.row(Eigen::Index(i)) =
        good[i].magnitudes.cast<float>().transpose();
    store.meta.push_back({good_entries[i]->source_id, good[i].class_label,
                          split[i]});
  }
  return store;
}

TimbreTarget target_from_csv(const std::string& ratings_csv, int dims,
                             bool impute_grand_mean, int smacof_iterations) {
  const auto raw = load_ratings_csv(ratings_csv);
  const auto normalized = normalize_studies(raw);
  const auto instruments = select_common_instruments(normalized);
  const auto matrix = aggregate(normalized, instruments, impute_grand_mean);
  TimbreTarget target = mds(matrix, dims);
  if (smacof_iterations > 0) smacof_refine(target, smacof_iterations);
  return target;
}

Eigen::VectorXf frame_for_model(const std::string& wav_path,
                                const FrameStore& store, double frame_ms) {
  TransformCache cache(store.spec);
  SpectralFrame frame = analyze_one(wav_path, cache, store.spec, frame_ms);
  return (frame.magnitudes / store.norm_constant).cast<float>();
}

ReportResult report(const Checkpoint& ckpt, const FrameStore& store,
                    const TimbreTarget* target) {
  if (ckpt.spec_hash != store.spec.hash())
    throw PlanMismatch("checkpoint was trained on a different transform");

  ReportResult r;
  r.classes = store.class_list();
  std::map<std::string, int> class_index;
  for (int i = 0; i < int(r.classes.size()); ++i)
    class_index[r.classes[size_t(i)]] = i;

  const auto test_rows = store.split_indices("test");
  if (!test_rows.empty()) {
    Eigen::MatrixXf test_x(Eigen::Index(test_rows.size()), store.frames.cols());
    for (Eigen::Index i = 0; i < Eigen::Index(test_rows.size()); ++i)
      test_x.row(i) = store.frames.row(test_rows[size_t(i)]);
    const EvalResult ev = evaluate(ckpt.model, test_x, ckpt.config.ll_samples,
                                   ckpt.config.seed ^ 0x51CA5EULL);
    r.test_mse = ev.mean_sq_err;
    r.test_ll = ev.log_likelihood;
    r.test_ll_per_dim = ev.log_likelihood / double(ckpt.model.d_x);
  }

  const auto train_rows = store.split_indices("train");
  if (train_rows.empty()) throw EmptySplit("store has no training rows");
  Eigen::MatrixXf train_x(Eigen::Index(train_rows.size()), store.frames.cols());
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < Eigen::Index(train_rows.size()); ++i) {
    train_x.row(i) = store.frames.row(train_rows[size_t(i)]);
    labels.push_back(
        class_index.at(store.meta[size_t(train_rows[size_t(i)])].class_label));
  }
  const Eigen::MatrixXf mu = encode(ckpt.model, train_x).first;
  const auto reps = class_representatives(mu.cast<double>(), labels,
                                          int(r.classes.size()));
  r.centroids_latent = reps.reps;

  r.pca = fit_pca(mu.cast<double>());
  r.centroids_pca = pca_project_rows(r.pca, reps.reps);

  if (target != nullptr) {
    Eigen::MatrixXd coords(Eigen::Index(reps.class_ids.size()),
                           target->coords.cols());
    for (Eigen::Index i = 0; i < Eigen::Index(reps.class_ids.size()); ++i) {
      const auto& name = r.classes[size_t(reps.class_ids[size_t(i)])];
      const int row = target->index_of(name);
      if (row < 0)
        throw UnknownClass("class '" + name + "' missing from the target");
      coords.row(i) = target->coords.row(row);
    }
    r.dist_kl = distance_kl(reps.reps, coords, ckpt.config.symmetric_norm);
  }
  return r;
}

void save_report_json(const std::string& path, const ReportResult& r) {
  nlohmann::json j;
  j["test_mse"] = r.test_mse;
  j["test_ll"] = r.test_ll;
  j["test_ll_per_dim"] = r.test_ll_per_dim;
  j["distance_kl"] = r.dist_kl;
  j["explained_variance_ratio"] = r.pca.explained_ratio();
  auto& classes = j["classes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    nlohmann::json c;
    c["name"] = r.classes[i];
    if (Eigen::Index(i) < r.centroids_pca.rows())
      c["pca"] = {r.centroids_pca(Eigen::Index(i), 0),
                  r.centroids_pca(Eigen::Index(i), 1),
                  r.centroids_pca(Eigen::Index(i), 2)};
    classes.push_back(c);
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace timbre
