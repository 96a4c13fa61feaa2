#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timbre/frames.hpp"
#include "timbre/latent.hpp"
#include "timbre/mds.hpp"
#include "timbre/ratings.hpp"
#include "timbre/vae.hpp"

namespace timbre {

struct AnalyzeOptions {
  TransformSpec spec;
  double frame_ms = 200.0;
  double train_fraction = 0.9;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  double max_failure_fraction = 0.1;
};

/// Walks <corpus_dir>/audio/<class>/*.wav (falling back to
/// <corpus_dir>/<class>/*.wav), resamples to the spec rate, transforms,
/// extracts the frame at frame_ms, normalizes corpus-wide, and splits
/// stratified by class. Unreadable files are listed on stderr and skipped;
/// more than max_failure_fraction failures is an error.
FrameStore analyze_corpus(const std::string& corpus_dir,
                          const AnalyzeOptions& options);

/// Ratings CSV -> normalized -> common instruments -> aggregate -> MDS.
TimbreTarget target_from_csv(const std::string& ratings_csv, int dims,
                             bool impute_grand_mean = false,
                             int smacof_iterations = 0);

/// Analyze a single file with the store's spec and normalization so new
/// material can be encoded against an existing model.
Eigen::VectorXf frame_for_model(const std::string& wav_path,
                                const FrameStore& store, double frame_ms);

struct ReportResult {
  double test_mse = 0;
  double test_ll = 0;
  double test_ll_per_dim = 0;
  double dist_kl = 0;  // class-centroid distance KL to the target space
  std::vector<std::string> classes;
  Eigen::MatrixXd centroids_latent;
  Eigen::MatrixXd centroids_pca;
  PcaProjection pca;
};

/// Test-set generative metrics plus the latent/target distance comparison
/// on full-train-split class centroids.
ReportResult report(const Checkpoint& ckpt, const FrameStore& store,
                    const TimbreTarget* target);

void save_report_json(const std::string& path, const ReportResult& r);

}  // namespace timbre
