#include "timbre/mds.hpp"

#include <Eigen/Eigenvalues>
#include <iostream>

#include "timbre/errors.hpp"

namespace timbre {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = (coords.row(i) - coords.row(j)).norm();
  return d;
}

TimbreTarget mds(const DissimilarityMatrix& matrix, int dims) {
  const Eigen::Index n = matrix.values.rows();
  if (n < 2) throw FormatError("MDS needs at least two points");
  if (dims < 1 || dims > int(n) - 1)
    throw FormatError("MDS dims must be in [1, n-1]");

  const Eigen::MatrixXd sq = matrix.values.array().square();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) -
      Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
  const Eigen::MatrixXd gram = -0.5 * centering * sq * centering;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw Error("eigendecomposition failed in MDS");

  TimbreTarget target;
  target.instruments = matrix.instruments;
  target.source_matrix = matrix;
  target.coords = Eigen::MatrixXd::Zero(n, dims);
  target.eigenvalues = Eigen::VectorXd::Zero(dims);
  int used = 0;
  for (int k = 0; k < dims; ++k) {
    const Eigen::Index src = n - 1 - k;  // eigenvalues come back ascending
    const double lambda = solver.eigenvalues()[src];
    if (lambda <= 0.0) break;
    target.eigenvalues[k] = lambda;
    target.coords.col(k) = solver.eigenvectors().col(src) * std::sqrt(lambda);
    ++used;
  }
  if (used < dims)
    std::cerr << "mds: only " << used << " positive eigenvalues of " << dims
              << " requested dimensions\n";

  // numerically exact centering, then deterministic axis orientation
  target.coords.rowwise() -= target.coords.colwise().mean();
  for (int k = 0; k < dims; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (target.coords(i, k) != 0.0) {
        if (target.coords(i, k) < 0.0) target.coords.col(k) = -target.coords.col(k);
        break;
      }
    }
  }
  return target;
}

void smacof_refine(TimbreTarget& target, int iterations) {
  const Eigen::Index n = target.coords.rows();
  const Eigen::MatrixXd& delta = target.source_matrix.values;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXd dist = pairwise_distances(target.coords);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        b(i, j) = dist(i, j) > 1e-12 ? -delta(i, j) / dist(i, j) : 0.0;
      }
    for (Eigen::Index i = 0; i < n; ++i) b(i, i) = -b.row(i).sum();
    target.coords = (b * target.coords) / double(n);  // Guttman transform
    target.coords.rowwise() -= target.coords.colwise().mean();
  }
}

}  // namespace timbre
