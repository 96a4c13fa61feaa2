#include "timbre/nsgt.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

#include "timbre/errors.hpp"

namespace timbre {

namespace {

double mel_of_hz(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double hz_of_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Glasberg-Moore ERB-rate scale
double erb_of_hz(double f) { return 21.4 * std::log10(1.0 + 0.00437 * f); }
double hz_of_erb(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437; }

Eigen::VectorXd spaced_on_scale(double fmin, double fmax, int count,
                                double (*fwd)(double), double (*inv)(double)) {
  const double lo = fwd(fmin), hi = fwd(fmax);
  Eigen::VectorXd f(count);
  for (int i = 0; i < count; ++i)
    f[i] = inv(lo + (hi - lo) * double(i) / double(count - 1));
  f[0] = fmin;
  f[count - 1] = fmax;
  return f;
}

// raised cosine peaked at `center`, reaching zero at center-wl and center+wr
double ramp_value(double b, double center, double wl, double wr) {
  const double d = b - center;
  const double w = d < 0 ? wl : wr;
  if (w <= 0 || std::abs(d) >= w) return 0.0;
  return 0.5 + 0.5 * std::cos(std::numbers::pi * d / w);
}

NsgtBand make_band(double center, double wl, double wr) {
  NsgtBand band;
  band.center_bin = center;
  band.start_bin = long(std::floor(center - wl)) + 1;
  const long end = long(std::ceil(center + wr)) - 1;  // inclusive
  const long len = std::max<long>(0, end - band.start_bin + 1);
  band.values.resize(len);
  for (long i = 0; i < len; ++i)
    band.values[i] = ramp_value(double(band.start_bin + i), center, wl, wr);
  return band;
}

long smallest_divisor_at_least(long n, long lo) {
  for (long d = lo; d < n; ++d)
    if (n % d == 0) return d;
  return n;
}

}  // namespace

Eigen::VectorXd nsgt_scale_frequencies(const TransformSpec& spec) {
  spec.validate();
  switch (spec.nsgt_scale) {
    case NsgtScale::Cq48: {
      const int count =
          int(std::ceil(48.0 * std::log2(spec.fmax_hz / spec.fmin_hz)));
      Eigen::VectorXd f(count);
      for (int k = 0; k < count; ++k)
        f[k] = spec.fmin_hz * std::pow(2.0, double(k) / 48.0);
      return f;
    }
    case NsgtScale::Mel400:
      return spaced_on_scale(spec.fmin_hz, spec.fmax_hz, 400, mel_of_hz,
                             hz_of_mel);
    case NsgtScale::Erb400:
      return spaced_on_scale(spec.fmin_hz, spec.fmax_hz, 400, erb_of_hz,
                             hz_of_erb);
  }
  throw Unsupported("unknown NSGT scale");
}

NsgtPlan nsgt_design(const TransformSpec& spec, double sample_rate,
                     long signal_len) {
  if (spec.kind != TransformKind::Nsgt) throw Unsupported("spec is not NSGT");
  NsgtPlan plan;
  plan.spec = spec;
  plan.spec.sample_rate = sample_rate;
  plan.signal_len = signal_len;
  plan.center_freqs_hz = nsgt_scale_frequencies(plan.spec);

  const double bins_per_hz = double(signal_len) / sample_rate;
  const int n_scale = int(plan.center_freqs_hz.size());
  const double nyq_bin = double(signal_len) / 2.0;

  std::vector<double> pos(n_scale + 2);
  pos[0] = 0.0;
  for (int k = 0; k < n_scale; ++k)
    pos[k + 1] = plan.center_freqs_hz[k] * bins_per_hz;
  pos[n_scale + 1] = nyq_bin;
  if (pos[n_scale] >= nyq_bin - 0.5)
    throw NotPainless("fmax leaves no room for the Nyquist helper band");

  plan.bands.reserve(n_scale + 2);
  long support_max = 0;
  for (int k = 0; k < n_scale + 2; ++k) {
    const double wl = k == 0 ? pos[1] : pos[k] - pos[k - 1];
    const double wr = k == n_scale + 1 ? nyq_bin - pos[n_scale] : pos[k + 1] - pos[k];
    plan.bands.push_back(make_band(pos[k], wl, wr));
    support_max = std::max<long>(support_max, plan.bands.back().values.size());
  }
  if (support_max > signal_len)
    throw NotPainless("band support exceeds signal length");
  plan.raster_len = smallest_divisor_at_least(signal_len, support_max);

  // diagonal frame operator: squared windows of every band plus the implicit
  // mirrors of the scale bands (DC and Nyquist wrap over themselves already)
  plan.frame_diag.setZero(signal_len);
  for (int k = 0; k < plan.n_bands(); ++k) {
    const NsgtBand& band = plan.bands[size_t(k)];
    const bool mirrored = k >= 1 && k <= n_scale;
    for (long i = 0; i < band.values.size(); ++i) {
      const long b = ((band.start_bin + i) % signal_len + signal_len) % signal_len;
      const double g2 = band.values[i] * band.values[i];
      plan.frame_diag[b] += g2;
      if (mirrored) plan.frame_diag[(signal_len - b) % signal_len] += g2;
    }
  }
  if (plan.frame_diag.minCoeff() <= 0.0)
    throw NotPainless("frame operator is singular; windows do not cover the axis");
  return plan;
}

Spectrogram nsgt_forward(const AudioBuffer& audio, const NsgtPlan& plan) {
  if (audio.samples.size() != plan.signal_len)
    throw PlanMismatch("plan designed for a different signal length");
  const long big_n = plan.signal_len;
  const long m = plan.raster_len;

  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum;
  fft.fwd(spectrum, Eigen::VectorXcd(audio.samples.cast<std::complex<double>>()));

  Spectrogram sg;
  sg.spec = plan.spec;
  sg.hop_seconds = plan.hop_seconds();
  sg.signal_len = big_n;
  sg.coeffs.resize(plan.n_bands(), m);
  Eigen::VectorXcd buf(m), coeff(m);
  for (int k = 0; k < plan.n_bands(); ++k) {
    const NsgtBand& band = plan.bands[size_t(k)];
    buf.setZero();
    for (long i = 0; i < band.values.size(); ++i) {
      const long b = ((band.start_bin + i) % big_n + big_n) % big_n;
      buf[b % m] = spectrum[b] * band.values[i];
    }
    fft.inv(coeff, buf);
    sg.coeffs.row(k) = coeff.transpose();
  }
  return sg;
}

AudioBuffer nsgt_inverse(const Spectrogram& sg, const NsgtPlan& plan) {
  if (sg.magnitude_only)
    throw MissingPhase("magnitude-only spectrogram cannot be inverted directly");
  if (sg.coeffs.rows() != plan.n_bands() || sg.coeffs.cols() != plan.raster_len)
    throw PlanMismatch("spectrogram shape does not match the plan");
  const long big_n = plan.signal_len;
  const long m = plan.raster_len;
  const int n_scale = plan.n_scale_bins();

  Eigen::FFT<double> fft;
  Eigen::VectorXcd reconstructed = Eigen::VectorXcd::Zero(big_n);
  Eigen::VectorXcd row(m), band_spec(m);
  for (int k = 0; k < plan.n_bands(); ++k) {
    const NsgtBand& band = plan.bands[size_t(k)];
    row = sg.coeffs.row(k).transpose();
    fft.fwd(band_spec, row);
    const bool mirrored = k >= 1 && k <= n_scale;
    for (long i = 0; i < band.values.size(); ++i) {
      const long b = ((band.start_bin + i) % big_n + big_n) % big_n;
      const double dual = band.values[i] / plan.frame_diag[b];
      reconstructed[b] += band_spec[b % m] * dual;
      if (mirrored) {
        const long bm = (big_n - b) % big_n;
        reconstructed[bm] += std::conj(band_spec[b % m]) * band.values[i] /
                             plan.frame_diag[bm];
      }
    }
  }
  Eigen::VectorXcd td;
  fft.inv(td, reconstructed);
  AudioBuffer out;
  out.sample_rate = plan.spec.sample_rate;
  out.samples = td.real();
  return out;
}

}  // namespace timbre
