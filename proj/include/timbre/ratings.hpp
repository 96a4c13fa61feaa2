#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace timbre {

/// One pairwise dissimilarity judgement on its study's raw scale.
struct RatingRecord {
  std::string study_id;
  std::string subject_id;
  std::string instrument_a;
  std::string instrument_b;
  double value = 0.0;
  double scale_min = 0.0;
  double scale_max = 1.0;
};

struct DissimilarityMatrix {
  std::vector<std::string> instruments;
  Eigen::MatrixXd values;  // symmetric, zero diagonal, entries in [0,1]
};

/// Per-instrument coordinates in the target timbre space.
struct TimbreTarget {
  std::vector<std::string> instruments;
  Eigen::MatrixXd coords;       // instruments x dims, centered
  Eigen::VectorXd eigenvalues;  // of the double-centered Gram matrix
  DissimilarityMatrix source_matrix;

  int index_of(const std::string& instrument) const;  // -1 when absent
};

/// CSV with header study,subject,instrument_a,instrument_b,value,scale_min,scale_max.
std::vector<RatingRecord> load_ratings_csv(const std::string& path);

/// Affine rescale of each study onto [0,1] using that study's scale bounds.
std::vector<RatingRecord> normalize_studies(std::vector<RatingRecord> records);

/// Largest instrument set whose pairs are all rated somewhere in the pooled
/// records. With several studies, only instruments appearing in at least two
/// of them are candidates; throws NoCommonPairs when nothing qualifies.
std::vector<std::string> select_common_instruments(
    const std::vector<RatingRecord>& records);

/// Mean of normalized ratings per unordered pair over the chosen instruments.
/// A pair with no ratings throws MissingPair unless impute_grand_mean is set.
DissimilarityMatrix aggregate(const std::vector<RatingRecord>& normalized,
                              const std::vector<std::string>& instruments,
                              bool impute_grand_mean = false);

void save_target_json(const std::string& path, const TimbreTarget& target);
TimbreTarget load_target_json(const std::string& path);

}  // namespace timbre
