#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timbre/audio.hpp"
#include "timbre/ratings.hpp"

namespace timbre {

/// Parameters of the synthetic corpus generator: harmonic tones with
/// class-specific spectral envelopes, plus a ratings table whose
/// dissimilarities are scaled envelope-parameter distances with subject
/// noise.
struct FixtureSpec {
  int classes = 12;
  int samples_per_class = 20;
  std::uint64_t seed = 1;
  double duration_s = 1.0;
  double sample_rate = 22050.0;
  int subjects = 5;
};

/// Per-class envelope: harmonic h gets weight
///   h^(-decay) * (1 - even_cut * [h even]) * (1 + 2 exp(-(ln h - ln formant)^2 / 0.18))
struct FixtureClass {
  std::string name;
  double decay = 1.0;
  double even_cut = 0.0;
  double formant_harmonic = 4.0;
};

std::vector<FixtureClass> fixture_classes(const FixtureSpec& spec);

AudioBuffer fixture_tone(const FixtureClass& cls, double f0, double amplitude,
                         double duration_s, double sample_rate);

std::vector<RatingRecord> fixture_ratings(const FixtureSpec& spec,
                                          const std::vector<FixtureClass>& classes);

/// Writes audio/<class>/<class>_<k>.wav, ratings.csv, and fixture.json
/// under out_dir. Fully deterministic in spec.seed.
void generate_fixture(const std::string& out_dir, const FixtureSpec& spec);

}  // namespace timbre
