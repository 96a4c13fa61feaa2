#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "timbre/transforms.hpp"

namespace timbre {

/// One magnitude frame: the data point the model trains on.
struct SpectralFrame {
  Eigen::VectorXd magnitudes;
  TransformSpec spec;
  std::string class_label;
  std::string source_id;
};

/// Magnitude of the column nearest at_ms. NSGT helper bands (DC/Nyquist)
/// are dropped so the frame has exactly the scale bins.
SpectralFrame extract_frame(const Spectrogram& sg, double at_ms);

/// Divides every frame by the single corpus-wide maximum, in place.
/// Returns that maximum so synthesis can undo the scaling.
double corpus_normalize(std::vector<SpectralFrame>& frames);

struct FrameMeta {
  std::string source_id;
  std::string class_label;
  std::string split;  // "train" or "test"
};

/// Persisted corpus of normalized frames plus the sidecar manifest.
struct FrameStore {
  TransformSpec spec;
  double norm_constant = 1.0;
  std::uint64_t seed = 0;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> frames;
  std::vector<FrameMeta> meta;

  Eigen::Index count() const { return frames.rows(); }
  int frame_len() const { return int(frames.cols()); }

  std::vector<std::string> class_list() const;
  std::vector<int> split_indices(const std::string& split) const;

  /// Writes the binary store at `path` and the manifest at `path + ".json"`.
  void save(const std::string& path) const;
  static FrameStore load(const std::string& path);
};

}  // namespace timbre
