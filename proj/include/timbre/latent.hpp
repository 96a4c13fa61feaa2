#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "timbre/griffin_lim.hpp"
#include "timbre/transforms.hpp"
#include "timbre/vae.hpp"

namespace timbre {

/// Three orthonormal principal axes of the latent posterior means.
struct PcaProjection {
  Eigen::VectorXd mean;       // d_z
  Eigen::MatrixXd basis;      // d_z x 3
  Eigen::VectorXd explained;  // variance per axis
  double total_variance = 0;

  double explained_ratio() const {
    return total_variance > 0 ? explained.sum() / total_variance : 1.0;
  }
};

/// Covariance eigenvectors of the rows of `latents`, axis signs
/// canonicalized (largest-magnitude loading positive). Fewer than three
/// positive-variance directions are padded with the remaining orthonormal
/// eigenvectors and a warning.
PcaProjection fit_pca(const Eigen::MatrixXd& latents);

Eigen::Vector3d pca_project(const PcaProjection& p, const Eigen::VectorXd& z);
Eigen::VectorXd pca_lift(const PcaProjection& p, const Eigen::Vector3d& xyz);
Eigen::MatrixXd pca_project_rows(const PcaProjection& p,
                                 const Eigen::MatrixXd& latents);

void save_pca_json(const std::string& path, const PcaProjection& p);
PcaProjection load_pca_json(const std::string& path);

/// Linear interpolation: n points from a to b inclusive.
Eigen::MatrixXd interpolate_path(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, int n);

struct EncodedSet {
  Eigen::MatrixXf mu;          // posterior means, one row per frame
  Eigen::RowVectorXf centroid; // mean of mu
};
/// Posterior means of a frame batch (rows already on the model's corpus
/// normalization). Throws EmptySplit on an empty batch.
EncodedSet encode_set(const VaeModel& model, const Eigen::MatrixXf& frames);

struct RenderResult {
  AudioBuffer audio;
  Spectrogram magnitudes;      // what Griffin-Lim consumed
  Eigen::MatrixXd frame_rows;  // de-normalized frames, one row per point
};

/// Tiles magnitude frame rows over frame_ms each, recovers phase, and emits
/// the waveform. phase_seed null means zero-phase start.
RenderResult render_magnitude_frames(const Eigen::MatrixXd& frame_rows,
                                     const TransformSpec& spec, double frame_ms,
                                     int gl_iterations,
                                     const std::uint64_t* phase_seed = nullptr);

/// Decodes latent waypoints, undoes corpus normalization, and renders.
RenderResult render_path(const VaeModel& model, const Eigen::MatrixXf& waypoints,
                         const TransformSpec& spec, double norm_constant,
                         double frame_ms, int gl_iterations,
                         const std::uint64_t* phase_seed = nullptr);

struct DescriptorGrid {
  std::vector<double> planes;  // first PCA coordinate per plane
  int size = 0;
  double range = 1.0;
  std::vector<Eigen::MatrixXd> centroid;   // one size x size matrix per plane
  std::vector<Eigen::MatrixXd> bandwidth;  // same layout
};

/// Decodes a size x size grid on each plane (coordinates 2 and 3 swept over
/// [-range, range], coordinate 1 fixed at the plane level) and evaluates
/// both descriptors at every node.
DescriptorGrid descriptor_grid(const VaeModel& model, const PcaProjection& pca,
                               const TransformSpec& spec,
                               const std::vector<double>& planes, int size,
                               double range);

/// Median absolute difference between 4-neighbors, a local smoothness
/// statistic of one grid field.
double grid_local_smoothness(const Eigen::MatrixXd& field);

}  // namespace timbre
