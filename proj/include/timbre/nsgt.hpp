#pragma once

#include <Eigen/Dense>
#include <vector>

#include "timbre/transforms.hpp"

namespace timbre {

/// One frequency-domain window of the analysis bank. Support is the run of
/// integer FFT bins start_bin..start_bin+values.size()-1, interpreted mod L
/// (the DC band wraps through negative frequencies).
struct NsgtBand {
  double center_bin = 0.0;  // fractional position on the length-L FFT grid
  long start_bin = 0;
  Eigen::VectorXd values;
};

/// Frequency-side non-stationary Gabor frame in the painless case, with all
/// bands rasterized onto one uniform time grid of raster_len columns so a
/// spectrogram column is a fixed-length vector across bins.
///
/// Band list: [0] DC helper, [1..n_scale] scale bins, [last] Nyquist helper.
/// Negative-frequency bands are implicit mirrors of the scale bins; the
/// raster length divides the signal length so mirror coefficients are exact
/// conjugates and never need storing.
struct NsgtPlan {
  TransformSpec spec;
  long signal_len = 0;
  long raster_len = 0;  // time columns; hop = signal_len / raster_len
  std::vector<NsgtBand> bands;
  Eigen::VectorXd frame_diag;       // diagonal frame operator over all L bins
  Eigen::VectorXd center_freqs_hz;  // scale bins only

  int n_scale_bins() const { return int(center_freqs_hz.size()); }
  int n_bands() const { return int(bands.size()); }
  long hop_samples() const { return signal_len / raster_len; }
  double hop_seconds() const { return double(hop_samples()) / spec.sample_rate; }
};

/// Center frequencies of the scale alone (no helper bands); derivable from
/// the spec without a signal length.
Eigen::VectorXd nsgt_scale_frequencies(const TransformSpec& spec);

NsgtPlan nsgt_design(const TransformSpec& spec, double sample_rate,
                     long signal_len);

Spectrogram nsgt_forward(const AudioBuffer& audio, const NsgtPlan& plan);
AudioBuffer nsgt_inverse(const Spectrogram& sg, const NsgtPlan& plan);

}  // namespace timbre
