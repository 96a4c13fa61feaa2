#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>

#include "timbre/audio.hpp"

namespace timbre {

enum class TransformKind { Stft, Dct, Nsgt };
enum class NsgtScale { Cq48, Mel400, Erb400 };

struct TransformSpec {
  TransformKind kind = TransformKind::Nsgt;
  NsgtScale nsgt_scale = NsgtScale::Erb400;
  double window_ms = 40.0;
  double hop_ms = 10.0;
  double fmin_hz = 30.0;
  double fmax_hz = 11000.0;
  double sample_rate = 22050.0;

  /// Throws FormatError on inconsistent parameters.
  void validate() const;

  int window_samples() const;
  int hop_samples() const;

  /// Name used on the CLI: stft | dct | nsgt-cq | nsgt-mel | nsgt-erb.
  std::string name() const;
  static TransformSpec from_name(const std::string& name);

  /// FNV-1a over the defining fields; used to match checkpoints to stores.
  std::uint64_t hash() const;

  bool operator==(const TransformSpec&) const = default;
};

/// Time-frequency coefficients on a uniform time grid, one column per hop.
/// For the NSGT the rows cover the full band list (DC and Nyquist helper
/// bands included); extract_frame slices out the scale bins.
struct Spectrogram {
  Eigen::MatrixXcd coeffs;  // bins x time
  TransformSpec spec;
  double hop_seconds = 0.0;
  long signal_len = 0;  // samples the inverse should reproduce
  bool magnitude_only = false;

  Eigen::Index bins() const { return coeffs.rows(); }
  Eigen::Index frames() const { return coeffs.cols(); }
  double duration_s() const { return double(signal_len) / spec.sample_rate; }
};

Spectrogram stft_forward(const AudioBuffer& audio, const TransformSpec& spec);
AudioBuffer stft_inverse(const Spectrogram& sg);

Spectrogram dct_forward(const AudioBuffer& audio, const TransformSpec& spec);
AudioBuffer dct_inverse(const Spectrogram& sg);

/// Orthonormal DCT-II of one block (FFT-based); inverse is its transpose.
Eigen::VectorXd dct2(const Eigen::VectorXd& x);
Eigen::VectorXd dct3(const Eigen::VectorXd& c);

/// Smallest length >= n whose prime factors are all <= 7.
long next_fast_len(long n);

}  // namespace timbre
