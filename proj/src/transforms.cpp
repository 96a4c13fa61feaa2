#include "timbre/transforms.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

#include "timbre/errors.hpp"

namespace timbre {

namespace {

Eigen::VectorXd hamming(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

struct Framing {
  int win = 0, hop = 0;
  Eigen::Index n_frames = 0;
};

Framing make_framing(long signal_len, const TransformSpec& spec) {
  Framing f;
  f.win = spec.window_samples();
  f.hop = spec.hop_samples();
  if (signal_len < f.win)
    throw InputTooShort("signal shorter than one analysis window");
  // last frame may run past the end; the tail is zero-padded so the inverse
  // can reproduce every input sample
  f.n_frames = 1 + Eigen::Index((signal_len - f.win + f.hop - 1) / f.hop);
  return f;
}

Eigen::VectorXd window_segment(const Eigen::VectorXd& x, Eigen::Index start,
                               const Eigen::VectorXd& w) {
  Eigen::VectorXd seg = Eigen::VectorXd::Zero(w.size());
  const Eigen::Index n = std::min<Eigen::Index>(w.size(), x.size() - start);
  seg.head(n) = x.segment(start, n).cwiseProduct(w.head(n));
  return seg;
}

/// Least-squares overlap-add: sum windowed frames and divide by the summed
/// squared window.
AudioBuffer overlap_add(const Eigen::MatrixXd& frames_time,
                        const Eigen::VectorXd& w, int hop, long signal_len,
                        double sample_rate) {
  const auto win = w.size();
  const Eigen::Index span = (frames_time.cols() - 1) * hop + win;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(span);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(span);
  for (Eigen::Index m = 0; m < frames_time.cols(); ++m) {
    acc.segment(m * hop, win) += frames_time.col(m).cwiseProduct(w);
    norm.segment(m * hop, win) += w.cwiseAbs2();
  }
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples = (acc.array() / norm.array().max(1e-300)).head(signal_len);
  return out;
}

}  // namespace

void TransformSpec::validate() const {
  if (sample_rate <= 0) throw FormatError("sample_rate must be positive");
  if (!(fmin_hz > 0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2))
    throw FormatError("need 0 < fmin < fmax <= Nyquist");
  if (kind != TransformKind::Nsgt && !(window_ms > hop_ms && hop_ms > 0))
    throw FormatError("need window_ms > hop_ms > 0");
}

int TransformSpec::window_samples() const {
  return int(std::llround(window_ms * 1e-3 * sample_rate));
}

int TransformSpec::hop_samples() const {
  return int(std::llround(hop_ms * 1e-3 * sample_rate));
}

std::string TransformSpec::name() const {
  switch (kind) {
    case TransformKind::Stft: return "stft";
    case TransformKind::Dct: return "dct";
    case TransformKind::Nsgt:
      switch (nsgt_scale) {
        case NsgtScale::Cq48: return "nsgt-cq";
        case NsgtScale::Mel400: return "nsgt-mel";
        case NsgtScale::Erb400: return "nsgt-erb";
      }
  }
  return "?";
}

TransformSpec TransformSpec::from_name(const std::string& name) {
  TransformSpec s;
  if (name == "stft") {
    s.kind = TransformKind::Stft;
  } else if (name == "dct") {
    s.kind = TransformKind::Dct;
  } else if (name == "nsgt-cq") {
    s.kind = TransformKind::Nsgt;
    s.nsgt_scale = NsgtScale::Cq48;
  } else if (name == "nsgt-mel") {
    s.kind = TransformKind::Nsgt;
    s.nsgt_scale = NsgtScale::Mel400;
  } else if (name == "nsgt-erb") {
    s.kind = TransformKind::Nsgt;
    s.nsgt_scale = NsgtScale::Erb400;
  } else {
    throw FormatError("unknown transform '" + name + "'");
  }
  return s;
}

std::uint64_t TransformSpec::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  mix(double(int(kind)));
  mix(double(int(nsgt_scale)));
  mix(window_ms);
  mix(hop_ms);
  mix(fmin_hz);
  mix(fmax_hz);
  mix(sample_rate);
  return h;
}

long next_fast_len(long n) {
  if (n < 1) return 1;
  for (long m = n;; ++m) {
    long r = m;
    for (long p : {2L, 3L, 5L, 7L})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

Spectrogram stft_forward(const AudioBuffer& audio, const TransformSpec& spec) {
  if (spec.kind != TransformKind::Stft) throw Unsupported("spec is not STFT");
  spec.validate();
  const Framing f = make_framing(audio.samples.size(), spec);
  const Eigen::VectorXd w = hamming(f.win);
  const Eigen::Index n_bins = f.win / 2 + 1;

  Eigen::FFT<double> fft;
  Spectrogram sg;
  sg.spec = spec;
  sg.spec.sample_rate = audio.sample_rate;
  sg.hop_seconds = double(f.hop) / audio.sample_rate;
  sg.signal_len = audio.samples.size();
  sg.coeffs.resize(n_bins, f.n_frames);
  Eigen::VectorXcd spec_full(f.win);
  for (Eigen::Index m = 0; m < f.n_frames; ++m) {
    Eigen::VectorXd seg = window_segment(audio.samples, m * f.hop, w);
    fft.fwd(spec_full, seg);
    sg.coeffs.col(m) = spec_full.head(n_bins);
  }
  return sg;
}

AudioBuffer stft_inverse(const Spectrogram& sg) {
  if (sg.spec.kind != TransformKind::Stft) throw Unsupported("spectrogram is not STFT");
  if (sg.magnitude_only)
    throw MissingPhase("magnitude-only spectrogram cannot be inverted directly");
  const int win = sg.spec.window_samples();
  const int hop = sg.spec.hop_samples();
  const Eigen::VectorXd w = hamming(win);

  Eigen::FFT<double> fft;
  Eigen::MatrixXd frames_time(win, sg.frames());
  Eigen::VectorXcd full(win);
  Eigen::VectorXcd td(win);
  for (Eigen::Index m = 0; m < sg.frames(); ++m) {
    full.head(sg.bins()) = sg.coeffs.col(m);
    for (Eigen::Index k = sg.bins(); k < win; ++k)
      full[k] = std::conj(sg.coeffs(win - k, m));
    fft.inv(td, full);
    frames_time.col(m) = td.real();
  }
  return overlap_add(frames_time, w, hop, sg.signal_len, sg.spec.sample_rate);
}

Eigen::VectorXd dct2(const Eigen::VectorXd& x) {
  // even-symmetric extension of length 2N, then one complex FFT
  const Eigen::Index n = x.size();
  Eigen::VectorXcd ext = Eigen::VectorXcd::Zero(2 * n);
  ext.head(n) = x.cast<std::complex<double>>();
  ext.tail(n) = x.reverse().cast<std::complex<double>>();
  Eigen::FFT<double> fft;
  Eigen::VectorXcd spec;
  fft.fwd(spec, ext);
  Eigen::VectorXd c(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> rot =
        std::polar(1.0, -std::numbers::pi * double(k) / (2.0 * double(n)));
    const double raw = 0.5 * (rot * spec[k]).real();  // sum x_m cos(...)
    const double scale = k == 0 ? std::sqrt(1.0 / double(n))
                                : std::sqrt(2.0 / double(n));
    c[k] = raw * scale;
  }
  return c;
}

Eigen::VectorXd dct3(const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  Eigen::VectorXcd spec = Eigen::VectorXcd::Zero(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / double(n))
                                : std::sqrt(2.0 / double(n));
    const double raw = c[k] / scale;
    spec[k] = 2.0 * raw *
              std::polar(1.0, std::numbers::pi * double(k) / (2.0 * double(n)));
  }
  // bin n is identically zero; fill the conjugate half
  for (Eigen::Index k = n + 1; k < 2 * n; ++k)
    spec[k] = std::conj(spec[2 * n - k]);
  Eigen::FFT<double> fft;
  Eigen::VectorXcd td;
  fft.inv(td, spec);
  return td.real().head(n);
}

Spectrogram dct_forward(const AudioBuffer& audio, const TransformSpec& spec) {
  if (spec.kind != TransformKind::Dct) throw Unsupported("spec is not DCT");
  spec.validate();
  const Framing f = make_framing(audio.samples.size(), spec);
  const Eigen::VectorXd w = hamming(f.win);

  Spectrogram sg;
  sg.spec = spec;
  sg.spec.sample_rate = audio.sample_rate;
  sg.hop_seconds = double(f.hop) / audio.sample_rate;
  sg.signal_len = audio.samples.size();
  sg.coeffs.resize(f.win, f.n_frames);
  for (Eigen::Index m = 0; m < f.n_frames; ++m) {
    Eigen::VectorXd seg = window_segment(audio.samples, m * f.hop, w);
    sg.coeffs.col(m) = dct2(seg).cast<std::complex<double>>();
  }
  return sg;
}

AudioBuffer dct_inverse(const Spectrogram& sg) {
  if (sg.spec.kind != TransformKind::Dct) throw Unsupported("spectrogram is not DCT");
  if (sg.magnitude_only)
    throw MissingPhase("sign information missing; run phase recovery first");
  const int win = sg.spec.window_samples();
  const int hop = sg.spec.hop_samples();
  const Eigen::VectorXd w = hamming(win);
  Eigen::MatrixXd frames_time(win, sg.frames());
  for (Eigen::Index m = 0; m < sg.frames(); ++m)
    frames_time.col(m) = dct3(sg.coeffs.col(m).real());
  return overlap_add(frames_time, w, hop, sg.signal_len, sg.spec.sample_rate);
}

}  // namespace timbre
