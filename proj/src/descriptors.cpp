#include "timbre/descriptors.hpp"

#include <cmath>

#include "timbre/errors.hpp"
#include "timbre/nsgt.hpp"

namespace timbre {

Eigen::VectorXd bin_frequencies(const TransformSpec& spec) {
  switch (spec.kind) {
    case TransformKind::Stft: {
      const int n = spec.window_samples();
      return Eigen::VectorXd::LinSpaced(n / 2 + 1, 0.0, double(n / 2)) *
             (spec.sample_rate / double(n));
    }
    case TransformKind::Dct: {
      const int n = spec.window_samples();
      return Eigen::VectorXd::LinSpaced(n, 0.0, double(n - 1)) *
             (spec.sample_rate / (2.0 * double(n)));
    }
    case TransformKind::Nsgt:
      return nsgt_scale_frequencies(spec);
  }
  throw Unsupported("unknown transform kind");
}

bool descriptor_frequencies_physical(const TransformSpec& spec) {
  return spec.kind != TransformKind::Dct;
}

double spectral_centroid(const Eigen::VectorXd& magnitudes,
                         const Eigen::VectorXd& freqs_hz) {
  const double total = magnitudes.sum();
  if (!(total > 0.0))
    throw UndefinedDescriptor("centroid of an all-zero frame");
  return magnitudes.dot(freqs_hz) / total;
}

double spectral_bandwidth(const Eigen::VectorXd& magnitudes,
                          const Eigen::VectorXd& freqs_hz) {
  const double centroid = spectral_centroid(magnitudes, freqs_hz);
  const double total = magnitudes.sum();
  const double var =
      (magnitudes.array() * (freqs_hz.array() - centroid).square()).sum() /
      total;
  return std::sqrt(std::max(0.0, var));
}

double spectral_centroid(const SpectralFrame& frame) {
  return spectral_centroid(frame.magnitudes, bin_frequencies(frame.spec));
}

double spectral_bandwidth(const SpectralFrame& frame) {
  return spectral_bandwidth(frame.magnitudes, bin_frequencies(frame.spec));
}

}  // namespace timbre
