#pragma once

#include <Eigen/Dense>
#include <vector>

#include "timbre/autodiff.hpp"

namespace timbre {

/// Epsilon floor inside every log and quotient of the distance-KL penalty.
inline constexpr double kRegEpsilon = 1e-12;

/// Row-stochastic Gaussian neighbor distribution over latent class points
/// with sigma_i = 1/sqrt(2): D_ij = exp(-|z_i-z_j|^2) / sum_{k!=i} exp(-|z_i-z_k|^2).
/// Rows each sum to 1; the diagonal is zero. Coincident points give uniform
/// rows (the analytic limit).
Eigen::MatrixXd latent_neighbor_dist(const Eigen::MatrixXd& points);

/// Student-t distances over target coordinates with one global
/// normalization over all ordered pairs: the whole matrix sums to 1; rows
/// individually do not.
Eigen::MatrixXd target_neighbor_dist(const Eigen::MatrixXd& coords);

/// Row-normalized variant of the Student-t distances (ablation option; the
/// printed form above is the default).
Eigen::MatrixXd target_neighbor_dist_rownorm(const Eigen::MatrixXd& coords);

/// Sum over anchors of KL divergences between the two distance
/// distributions: sum_ij Dz_ij * log(Dz_ij / Dt_ij), with the epsilon floor.
double reg_value(const Eigen::MatrixXd& latent_dist,
                 const Eigen::MatrixXd& target_dist);

/// Convenience: builds both distributions and evaluates the penalty.
double distance_kl(const Eigen::MatrixXd& latent_points,
                   const Eigen::MatrixXd& target_coords,
                   bool symmetric_norm = false);

struct ClassReps {
  Eigen::MatrixXd reps;        // one row per present class
  std::vector<int> class_ids;  // ascending ids of the present classes
};

/// Mean latent position per class over the rows present in the batch.
ClassReps class_representatives(const Eigen::MatrixXd& latents,
                                const std::vector<int>& labels, int n_classes);

/// Differentiable penalty on the tape: z_reps rows are class points, and
/// target_dist is the constant distance distribution of the matching target
/// rows. Gradient flows through the latent side only.
template <class S>
ad::Var reg_loss_on_tape(ad::Tape<S>& tape, ad::Var z_reps,
                         const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&
                             target_dist) {
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  const ad::Var sqd = tape.pairwise_sqdist(z_reps);
  const ad::Var p = tape.masked_row_softmax(tape.scale(sqd, S(-1)));
  Matrix log_q =
      (target_dist.array() + S(kRegEpsilon)).log().matrix();
  const ad::Var log_p = tape.log(tape.add_scalar(p, S(kRegEpsilon)));
  const ad::Var diff = tape.sub(log_p, tape.constant(std::move(log_q)));
  return tape.sum(tape.mul(p, diff));
}

}  // namespace timbre
