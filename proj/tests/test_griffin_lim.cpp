#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "timbre/errors.hpp"
#include "timbre/griffin_lim.hpp"
#include "timbre/rng.hpp"

using namespace timbre;

namespace {

AudioBuffer harmonic_tone(double f0, long len) {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.setZero(len);
  for (int h = 1; h <= 12; ++h)
    for (Eigen::Index i = 0; i < len; ++i)
      a.samples[i] += (0.4 / h) *
                      std::sin(2.0 * std::numbers::pi * h * f0 * i / 22050.0);
  return a;
}

// hop-aligned Hann grain; sparse enough that plain alternating projections
// reach deep convergence within 100 iterations
AudioBuffer burst(long len) {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.setZero(len);
  const long start = 221 * 14, glen = 882;
  for (long i = 0; i < glen; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / glen);
    a.samples[start + i] =
        w * std::sin(2.0 * std::numbers::pi * 880.0 * i / 22050.0);
  }
  return a;
}

Spectrogram magnitudes_of(const Spectrogram& sg) {
  Spectrogram m = sg;
  m.coeffs = sg.coeffs.cwiseAbs().cast<std::complex<double>>();
  m.magnitude_only = true;
  return m;
}

}  // namespace

TEST_CASE("griffin-lim: converges on self-generated magnitudes (stft)") {
  SpectralTransform tf(TransformSpec::from_name("stft"), 11025);
  const auto target = magnitudes_of(tf.forward(burst(11025)));
  const auto result = griffin_lim(target, tf, 100);
  REQUIRE(result.convergence.size() == 100);
  CHECK(result.convergence.back() < 0.01);
  for (std::size_t i = 1; i < result.convergence.size(); ++i)
    CHECK(result.convergence[i] <= result.convergence[i - 1] + 1e-9);
  // more iterations never hurt
  CHECK(result.convergence[49] <= result.convergence[0] + 1e-12);
}

TEST_CASE("griffin-lim: monotone and improving on nsgt magnitudes") {
  TransformSpec spec = TransformSpec::from_name("nsgt-erb");
  SpectralTransform tf(spec, 11025);
  const auto target = magnitudes_of(tf.forward(harmonic_tone(330.0, 11025)));
  const auto result = griffin_lim(target, tf, 60);
  CHECK(result.convergence.back() < 0.5 * result.convergence.front());
  for (std::size_t i = 1; i < result.convergence.size(); ++i)
    CHECK(result.convergence[i] <= result.convergence[i - 1] + 1e-9);
}

TEST_CASE("griffin-lim: dct sign recovery is monotone") {
  SpectralTransform tf(TransformSpec::from_name("dct"), 11025);
  const auto target = magnitudes_of(tf.forward(harmonic_tone(196.0, 11025)));
  const auto result = griffin_lim(target, tf, 50);
  for (std::size_t i = 1; i < result.convergence.size(); ++i)
    CHECK(result.convergence[i] <= result.convergence[i - 1] + 1e-9);
}

TEST_CASE("griffin-lim: zero magnitudes give zero audio") {
  SpectralTransform tf(TransformSpec::from_name("stft"), 11025);
  Spectrogram zero = tf.magnitude_spectrogram(
      Eigen::MatrixXd::Zero(tf.frame_len(), tf.frame_count()));
  const auto result = griffin_lim(zero, tf, 5);
  CHECK(result.audio.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("griffin-lim: random phase initialization is seeded") {
  SpectralTransform tf(TransformSpec::from_name("stft"), 11025);
  const auto target = magnitudes_of(tf.forward(harmonic_tone(110.0, 11025)));
  const std::uint64_t seed = 42;
  const auto a = griffin_lim(target, tf, 10, &seed);
  const auto b = griffin_lim(target, tf, 10, &seed);
  CHECK((a.audio.samples - b.audio.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("magnitude-only spectrograms cannot be inverted directly") {
  SpectralTransform tf(TransformSpec::from_name("stft"), 11025);
  const auto target = magnitudes_of(tf.forward(harmonic_tone(220.0, 11025)));
  CHECK_THROWS_AS(tf.inverse(target), MissingPhase);
}

TEST_CASE("magnitude embedding round trip") {
  SpectralTransform tf(TransformSpec::from_name("nsgt-mel"), 11025);
  const auto sg = tf.forward(harmonic_tone(262.0, 11025));
  const Eigen::MatrixXd mags = tf.frame_magnitudes(sg);
  CHECK(mags.rows() == 400);
  const Spectrogram rebuilt = tf.magnitude_spectrogram(mags);
  CHECK(rebuilt.magnitude_only);
  CHECK(rebuilt.coeffs.rows() == sg.coeffs.rows());
  CHECK((rebuilt.coeffs.middleRows(1, 400).real() - mags).norm() == 0.0);
}
