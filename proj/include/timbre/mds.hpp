#pragma once

#include <Eigen/Dense>

#include "timbre/ratings.hpp"

namespace timbre {

/// Classical (Torgerson) multidimensional scaling: double-center the squared
/// dissimilarities and embed on the leading non-negative eigenpairs. Output
/// is centered; axis signs are canonicalized (first nonzero loading made
/// positive). If fewer than `dims` positive eigenvalues exist the embedding
/// is truncated and the remaining columns are zero.
TimbreTarget mds(const DissimilarityMatrix& matrix, int dims = 3);

/// Optional stress-majorization refinement (SMACOF) of an existing
/// embedding; keeps the classical solution as its start point.
void smacof_refine(TimbreTarget& target, int iterations);

/// Pairwise Euclidean distances of embedded coordinates (rows are points).
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& coords);

}  // namespace timbre
