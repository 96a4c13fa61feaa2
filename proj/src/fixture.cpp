#include "timbre/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "timbre/errors.hpp"
#include "timbre/rng.hpp"

namespace timbre {

namespace fs = std::filesystem;

std::vector<FixtureClass> fixture_classes(const FixtureSpec& spec) {
  if (spec.classes < 3) throw FormatError("fixture needs at least 3 classes");
  CounterRng rng(spec.seed, CounterRng::tag("fixture-classes"));
  std::vector<FixtureClass> out;
  for (int c = 0; c < spec.classes; ++c) {
    FixtureClass cls;
    char name[16];
    std::snprintf(name, sizeof name, "inst%02d", c);
    cls.name = name;
    cls.decay = rng.uniform(0.5, 2.2);
    cls.even_cut = rng.uniform(0.0, 0.7);
    cls.formant_harmonic = std::exp(rng.uniform(std::log(2.0), std::log(14.0)));
    out.push_back(cls);
  }
  return out;
}

namespace {

double harmonic_weight(const FixtureClass& cls, int h) {
  const double tilt = std::pow(double(h), -cls.decay);
  const double parity = h % 2 == 0 ? 1.0 - cls.even_cut : 1.0;
  const double lr = std::log(double(h)) - std::log(cls.formant_harmonic);
  const double formant = 1.0 + 2.0 * std::exp(-lr * lr / 0.18);
  return tilt * parity * formant;
}

/// Normalized envelope parameters; rating dissimilarity is the scaled
/// Euclidean distance in this space.
Eigen::Vector3d class_params(const FixtureClass& cls) {
  return {(cls.decay - 0.5) / 1.7, cls.even_cut / 0.7,
          (std::log(cls.formant_harmonic) - std::log(2.0)) /
              (std::log(14.0) - std::log(2.0))};
}

}  // namespace

AudioBuffer fixture_tone(const FixtureClass& cls, double f0, double amplitude,
                         double duration_s, double sample_rate) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  const long len = long(std::llround(duration_s * sample_rate));
  a.samples.setZero(len);

  std::vector<double> weights;
  for (int h = 1; h * f0 < 0.98 * sample_rate / 2.0; ++h)
    weights.push_back(harmonic_weight(cls, h));
  double peak = 0;
  for (double w : weights) peak += w;
  const double gain = amplitude / peak;

  for (std::size_t hi = 0; hi < weights.size(); ++hi) {
    const double w = gain * weights[hi];
    const double omega = 2.0 * std::numbers::pi * (double(hi) + 1.0) * f0 /
                         sample_rate;
    for (long i = 0; i < len; ++i) a.samples[i] += w * std::sin(omega * i);
  }
  // 10 ms raised-cosine fades against clicks
  const long fade = std::min<long>(len / 2, long(0.010 * sample_rate));
  for (long i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
    a.samples[i] *= g;
    a.samples[len - 1 - i] *= g;
  }
  return a;
}

std::vector<RatingRecord> fixture_ratings(
    const FixtureSpec& spec, const std::vector<FixtureClass>& classes) {
  CounterRng rng(spec.seed, CounterRng::tag("fixture-ratings"));
  // scale parameter distances into a mid-range of [0,1]
  double max_dist = 1e-12;
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = i + 1; j < classes.size(); ++j)
      max_dist = std::max(max_dist,
                          (class_params(classes[i]) - class_params(classes[j]))
                              .norm());
  std::vector<RatingRecord> out;
  for (int s = 0; s < spec.subjects; ++s)
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (std::size_t j = i + 1; j < classes.size(); ++j) {
        RatingRecord r;
        r.study_id = "synthetic";
        r.subject_id = "subj" + std::to_string(s);
        r.instrument_a = classes[i].name;
        r.instrument_b = classes[j].name;
        const double base =
            0.1 + 0.85 * (class_params(classes[i]) - class_params(classes[j]))
                              .norm() /
                      max_dist;
        r.value = std::clamp(base + 0.05 * rng.gaussian(), 0.0, 1.0);
        r.scale_min = 0.0;
        r.scale_max = 1.0;
        out.push_back(r);
      }
  return out;
}

void generate_fixture(const std::string& out_dir, const FixtureSpec& spec) {
  const auto classes = fixture_classes(spec);
  fs::create_directories(out_dir);

  CounterRng rng(spec.seed, CounterRng::tag("fixture-samples"));
  nlohmann::json meta;
  meta["seed"] = spec.seed;
  meta["classes"] = nlohmann::json::array();
  for (const auto& cls : classes) {
    const fs::path dir = fs::path(out_dir) / "audio" / cls.name;
    fs::create_directories(dir);
    for (int k = 0; k < spec.samples_per_class; ++k) {
      // shared register across classes; envelopes carry the class identity
      const double f0 = 165.0 * std::pow(2.0, rng.uniform(0.0, 1.0));
      const double amp = rng.uniform(0.3, 0.9);
      char name[32];
      std::snprintf(name, sizeof name, "%s_%02d.wav", cls.name.c_str(), k);
      save_wav((dir / name).string(),
               fixture_tone(cls, f0, amp, spec.duration_s, spec.sample_rate));
    }
    meta["classes"].push_back({{"name", cls.name},
                               {"decay", cls.decay},
                               {"even_cut", cls.even_cut},
                               {"formant_harmonic", cls.formant_harmonic}});
  }

  const auto ratings = fixture_ratings(spec, classes);
  std::ofstream csv(fs::path(out_dir) / "ratings.csv");
  if (!csv) throw IoError("cannot write ratings.csv");
  csv << "study,subject,instrument_a,instrument_b,value,scale_min,scale_max\n";
  char row[160];
  for (const auto& r : ratings) {
    std::snprintf(row, sizeof row, "%s,%s,%s,%s,%.6f,%g,%g\n",
                  r.study_id.c_str(), r.subject_id.c_str(),
                  r.instrument_a.c_str(), r.instrument_b.c_str(), r.value,
                  r.scale_min, r.scale_max);
    csv << row;
  }

  std::ofstream js(fs::path(out_dir) / "fixture.json");
  if (!js) throw IoError("cannot write fixture.json");
  js << meta.dump(2) << "\n";
}

}  // namespace timbre
