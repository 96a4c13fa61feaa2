#pragma once

#include <Eigen/Dense>

#include "timbre/frames.hpp"
#include "timbre/transforms.hpp"

namespace timbre {

/// Frequency in Hz for each frame bin. STFT: k*sr/N. NSGT: the scale's
/// center frequencies. DCT: k*sr/(2N), a quefrency-like axis kept only for
/// completeness; descriptor output flags it as non-physical.
Eigen::VectorXd bin_frequencies(const TransformSpec& spec);

bool descriptor_frequencies_physical(const TransformSpec& spec);

/// Magnitude-weighted mean frequency. Throws UndefinedDescriptor on an
/// all-zero frame.
double spectral_centroid(const Eigen::VectorXd& magnitudes,
                         const Eigen::VectorXd& freqs_hz);

/// Magnitude-weighted standard deviation of frequency around the centroid.
double spectral_bandwidth(const Eigen::VectorXd& magnitudes,
                          const Eigen::VectorXd& freqs_hz);

double spectral_centroid(const SpectralFrame& frame);
double spectral_bandwidth(const SpectralFrame& frame);

}  // namespace timbre
