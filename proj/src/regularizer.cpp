#include "timbre/regularizer.hpp"

#include <cmath>
#include <map>

#include "timbre/errors.hpp"

namespace timbre {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& pts) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = (pts.row(i) - pts.row(j)).squaredNorm();
  return d;
}

}  // namespace

Eigen::MatrixXd latent_neighbor_dist(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw ShapeError("need at least two latent points");
  const Eigen::MatrixXd sqd = squared_distances(points);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) mx = std::max(mx, -sqd(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += std::exp(-sqd(i, j) - mx);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out(i, j) = std::exp(-sqd(i, j) - mx) / denom;
  }
  return out;
}

Eigen::MatrixXd target_neighbor_dist(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  if (n < 2) throw ShapeError("need at least two target points");
  const Eigen::MatrixXd sqd = squared_distances(coords);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  double denom = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += 1.0 / (1.0 + sqd(i, j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out(i, j) = (1.0 / (1.0 + sqd(i, j))) / denom;
  return out;
}

Eigen::MatrixXd target_neighbor_dist_rownorm(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  if (n < 2) throw ShapeError("need at least two target points");
  const Eigen::MatrixXd sqd = squared_distances(coords);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += 1.0 / (1.0 + sqd(i, j));
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out(i, j) = (1.0 / (1.0 + sqd(i, j))) / denom;
  }
  return out;
}

double reg_value(const Eigen::MatrixXd& latent_dist,
                 const Eigen::MatrixXd& target_dist) {
  if (latent_dist.rows() != target_dist.rows() ||
      latent_dist.cols() != target_dist.cols())
    throw ShapeError("distance distributions must have the same shape");
  double r = 0.0;
  for (Eigen::Index i = 0; i < latent_dist.rows(); ++i)
    for (Eigen::Index j = 0; j < latent_dist.cols(); ++j) {
      if (i == j) continue;
      const double p = latent_dist(i, j);
      if (p <= 0.0) continue;
      r += p * (std::log(p + kRegEpsilon) -
                std::log(target_dist(i, j) + kRegEpsilon));
    }
  return r;
}

double distance_kl(const Eigen::MatrixXd& latent_points,
                   const Eigen::MatrixXd& target_coords, bool symmetric_norm) {
  const Eigen::MatrixXd dz = latent_neighbor_dist(latent_points);
  const Eigen::MatrixXd dt = symmetric_norm
                                 ? target_neighbor_dist_rownorm(target_coords)
                                 : target_neighbor_dist(target_coords);
  return reg_value(dz, dt);
}

ClassReps class_representatives(const Eigen::MatrixXd& latents,
                                const std::vector<int>& labels, int n_classes) {
  if (Eigen::Index(labels.size()) != latents.rows())
    throw ShapeError("one label per latent row required");
  std::map<int, std::pair<Eigen::VectorXd, int>> acc;
  for (Eigen::Index r = 0; r < latents.rows(); ++r) {
    const int c = labels[size_t(r)];
    if (c < 0 || c >= n_classes) throw ShapeError("label out of range");
    auto [it, fresh] =
        acc.try_emplace(c, Eigen::VectorXd::Zero(latents.cols()), 0);
    it->second.first += latents.row(r).transpose();
    it->second.second += 1;
  }
  ClassReps reps;
  reps.reps.resize(Eigen::Index(acc.size()), latents.cols());
  Eigen::Index row = 0;
  for (const auto& [c, entry] : acc) {
    reps.class_ids.push_back(c);
    reps.reps.row(row++) = (entry.first / double(entry.second)).transpose();
  }
  return reps;
}

}  // namespace timbre
