#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "timbre/nsgt.hpp"
#include "timbre/transforms.hpp"

namespace timbre {

/// One entry point for every invertible transform pair. For the NSGT the
/// plan is designed once at construction and reused for each call.
class SpectralTransform {
 public:
  SpectralTransform(TransformSpec spec, long signal_len);

  const TransformSpec& spec() const { return spec_; }
  long signal_len() const { return signal_len_; }
  double hop_seconds() const;
  /// Length of a SpectralFrame (scale bins only for the NSGT).
  int frame_len() const;
  /// Time columns produced for signal_len samples.
  Eigen::Index frame_count() const;
  const NsgtPlan* plan() const { return plan_.get(); }

  Spectrogram forward(const AudioBuffer& audio) const;
  AudioBuffer inverse(const Spectrogram& sg) const;

  /// frame_len x T magnitudes (NSGT helper bands dropped).
  Eigen::MatrixXd frame_magnitudes(const Spectrogram& sg) const;
  /// Embeds frame_len x T magnitudes back into a magnitude-only spectrogram
  /// (NSGT helper bands zero). T must equal frame_count().
  Spectrogram magnitude_spectrogram(const Eigen::MatrixXd& mags) const;

 private:
  TransformSpec spec_;
  long signal_len_ = 0;
  std::shared_ptr<const NsgtPlan> plan_;
};

struct GriffinLimResult {
  AudioBuffer audio;
  /// Relative spectral-convergence error after each inverse/forward cycle.
  std::vector<double> convergence;
};

/// Alternating-projection phase recovery from a magnitude-only spectrogram.
/// Phase starts at zero unless random_seed is set. Plain iteration (no
/// momentum), so the convergence error is non-increasing.
GriffinLimResult griffin_lim(const Spectrogram& magnitudes,
                             const SpectralTransform& transform,
                             int iterations,
                             const std::uint64_t* random_seed = nullptr);

}  // namespace timbre
