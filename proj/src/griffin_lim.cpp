#include "timbre/griffin_lim.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "timbre/errors.hpp"
#include "timbre/rng.hpp"

namespace timbre {

SpectralTransform::SpectralTransform(TransformSpec spec, long signal_len)
    : spec_(spec), signal_len_(signal_len) {
  spec_.validate();
  if (spec_.kind == TransformKind::Nsgt) {
    plan_ = std::make_shared<NsgtPlan>(
        nsgt_design(spec_, spec_.sample_rate, signal_len));
  } else if (signal_len < spec_.window_samples()) {
    throw InputTooShort("signal shorter than one analysis window");
  }
}

double SpectralTransform::hop_seconds() const {
  if (plan_) return plan_->hop_seconds();
  return double(spec_.hop_samples()) / spec_.sample_rate;
}

int SpectralTransform::frame_len() const {
  switch (spec_.kind) {
    case TransformKind::Stft: return spec_.window_samples() / 2 + 1;
    case TransformKind::Dct: return spec_.window_samples();
    case TransformKind::Nsgt: return plan_->n_scale_bins();
  }
  throw Unsupported("unknown transform kind");
}

Eigen::Index SpectralTransform::frame_count() const {
  if (plan_) return plan_->raster_len;
  const int win = spec_.window_samples(), hop = spec_.hop_samples();
  return 1 + Eigen::Index((signal_len_ - win + hop - 1) / hop);
}

Spectrogram SpectralTransform::forward(const AudioBuffer& audio) const {
  if (audio.samples.size() != signal_len_)
    throw PlanMismatch("transform prepared for a different signal length");
  switch (spec_.kind) {
    case TransformKind::Stft: return stft_forward(audio, spec_);
    case TransformKind::Dct: return dct_forward(audio, spec_);
    case TransformKind::Nsgt: return nsgt_forward(audio, *plan_);
  }
  throw Unsupported("unknown transform kind");
}

AudioBuffer SpectralTransform::inverse(const Spectrogram& sg) const {
  switch (spec_.kind) {
    case TransformKind::Stft: return stft_inverse(sg);
    case TransformKind::Dct: return dct_inverse(sg);
    case TransformKind::Nsgt: return nsgt_inverse(sg, *plan_);
  }
  throw Unsupported("unknown transform kind");
}

Eigen::MatrixXd SpectralTransform::frame_magnitudes(const Spectrogram& sg) const {
  if (spec_.kind == TransformKind::Nsgt)
    return sg.coeffs.middleRows(1, sg.bins() - 2).cwiseAbs();
  return sg.coeffs.cwiseAbs();
}

Spectrogram SpectralTransform::magnitude_spectrogram(
    const Eigen::MatrixXd& mags) const {
  if (mags.rows() != frame_len())
    throw PlanMismatch("magnitude rows do not match the transform bins");
  if (spec_.kind == TransformKind::Nsgt && mags.cols() != frame_count())
    throw PlanMismatch("NSGT raster is fixed; column count must match");
  Spectrogram sg;
  sg.spec = spec_;
  sg.hop_seconds = hop_seconds();
  sg.magnitude_only = true;
  if (spec_.kind == TransformKind::Nsgt) {
    sg.signal_len = signal_len_;
    sg.coeffs.setZero(mags.rows() + 2, mags.cols());
    sg.coeffs.middleRows(1, mags.rows()) = mags.cast<std::complex<double>>();
  } else {
    const int win = spec_.window_samples(), hop = spec_.hop_samples();
    sg.signal_len = (mags.cols() - 1) * hop + win;
    sg.coeffs = mags.cast<std::complex<double>>();
  }
  return sg;
}

GriffinLimResult griffin_lim(const Spectrogram& magnitudes,
                             const SpectralTransform& transform,
                             int iterations,
                             const std::uint64_t* random_seed) {
  const Eigen::MatrixXd target = magnitudes.coeffs.cwiseAbs();
  const double target_norm = target.norm();

  GriffinLimResult result;
  result.convergence.assign(size_t(std::max(0, iterations)), 0.0);

  Spectrogram current = magnitudes;
  current.magnitude_only = false;
  if (random_seed != nullptr) {
    CounterRng rng(*random_seed, CounterRng::tag("griffin-lim-phase"));
    current.coeffs = target.binaryExpr(target, [&](double mv, double) {
      return std::polar(mv, rng.uniform(0.0, 2.0 * std::numbers::pi));
    });
  } else {
    current.coeffs = target.cast<std::complex<double>>();
  }

  if (target_norm == 0.0) {
    result.audio = transform.inverse(current);
    return result;
  }

  for (int it = 0; it < iterations; ++it) {
    const AudioBuffer estimate = transform.inverse(current);
    const Spectrogram analyzed = transform.forward(estimate);
    const Eigen::MatrixXd achieved = analyzed.coeffs.cwiseAbs();
    result.convergence[size_t(it)] = (achieved - target).norm() / target_norm;
    current.coeffs = analyzed.coeffs.binaryExpr(
        achieved, [](std::complex<double> c, double a) {
          return a > 0 ? c / a : std::complex<double>(1.0, 0.0);
        });
    current.coeffs = current.coeffs.cwiseProduct(
        target.cast<std::complex<double>>());
  }
  result.audio = transform.inverse(current);
  return result;
}

}  // namespace timbre
