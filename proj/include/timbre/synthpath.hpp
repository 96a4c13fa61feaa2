#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "timbre/latent.hpp"
#include "timbre/transforms.hpp"
#include "timbre/vae.hpp"

namespace timbre {

enum class DescriptorKind { Centroid, Bandwidth };

DescriptorKind descriptor_kind_from_name(const std::string& name);

/// Desired descriptor evolution in Hz, one value per synthesis step.
struct TargetSeries {
  Eigen::VectorXd values;
  DescriptorKind kind = DescriptorKind::Centroid;
};

/// Rescales a normalized shape onto Hz: origin_value + (shape - shape[0]) * span.
TargetSeries target_from_shape(const Eigen::VectorXd& shape, double origin_value,
                               double span_hz, DescriptorKind kind);

struct NeighborhoodSpec {
  double radius = 0.1;  // latent units (std-dev of the perturbations)
  int count = 64;       // candidates per step, besides the current point
  bool pca_subspace = true;  // perturb inside the 3-d projection plane
};

struct SynthResult {
  Eigen::MatrixXd spectra;   // N x F, de-normalized magnitudes
  Eigen::MatrixXf path;      // (N+1) x d_z latent points, row 0 = origin
  Eigen::VectorXd achieved;  // N+1 descriptor values, [0] = origin descriptor
  Eigen::VectorXd target;    // N+1 values, [0] anchored at the origin
  Eigen::VectorXd chosen_delta;  // N argmin objective values
};

/// Greedy neighborhood search: per step, decode `count` seeded Gaussian
/// perturbations of the current point (plus the point itself), evaluate the
/// descriptor, and keep the candidate whose descriptor increment best
/// matches the target increment. Deterministic for a fixed seed.
SynthResult descriptor_synth(const VaeModel& model,
                             const Eigen::VectorXf& origin_frame,
                             const TargetSeries& target,
                             const NeighborhoodSpec& nbh,
                             const PcaProjection& pca,
                             const TransformSpec& spec, double norm_constant,
                             std::uint64_t seed);

/// Tile, phase-recover, and emit audio for a synthesis result.
RenderResult render_synth(const SynthResult& result, const TransformSpec& spec,
                          double frame_ms, int gl_iterations,
                          const std::uint64_t* phase_seed = nullptr);

}  // namespace timbre
