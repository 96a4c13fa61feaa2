#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "timbre/descriptors.hpp"
#include "timbre/errors.hpp"
#include "timbre/latent.hpp"
#include "timbre/rng.hpp"

using namespace timbre;
using Mat = Eigen::MatrixXd;

namespace {

VaeModel tiny_model(int d_x, int d_z, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.latent_dims = d_z;
  cfg.hidden_units = 16;
  cfg.hidden_layers = 2;
  CounterRng rng(seed);
  return VaeModel::init(d_x, cfg, rng);
}

}  // namespace

TEST_CASE("pca: recovers an axis-aligned 3-d subspace exactly") {
  CounterRng rng(11);
  Mat latents = Mat::Zero(200, 64);
  for (int i = 0; i < 200; ++i) {
    latents(i, 3) = 4.0 * rng.gaussian();
    latents(i, 17) = 2.0 * rng.gaussian();
    latents(i, 40) = 1.0 * rng.gaussian();
  }
  const PcaProjection p = fit_pca(latents);
  CHECK(p.explained_ratio() == doctest::Approx(1.0).epsilon(1e-9));
  // axes sorted by variance and orthonormal
  CHECK(p.explained[0] > p.explained[1]);
  CHECK(p.explained[1] > p.explained[2]);
  CHECK((p.basis.transpose() * p.basis - Mat::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  // each axis is (up to sign and sampling noise) an original coordinate,
  // and sign canonicalization makes the big loading positive
  CHECK(p.basis(3, 0) > 0.99);
  CHECK(p.basis(17, 1) > 0.99);
  CHECK(p.basis(40, 2) > 0.99);

  // projection preserves distances of in-subspace points
  const Eigen::VectorXd a = latents.row(0), b = latents.row(1);
  const double d_latent = (a - b).norm();
  const double d_proj = (pca_project(p, a) - pca_project(p, b)).norm();
  CHECK(d_proj == doctest::Approx(d_latent).epsilon(1e-9));
}

TEST_CASE("pca: isotropic cloud spreads variance evenly") {
  CounterRng rng(13);
  Mat latents(10000, 8);
  rng.fill_gaussian(latents);
  const PcaProjection p = fit_pca(latents);
  CHECK(p.explained[0] / p.explained[2] < 1.1);
}

TEST_CASE("pca: project/lift identities") {
  CounterRng rng(17);
  Mat latents(50, 12);
  rng.fill_gaussian(latents);
  const PcaProjection p = fit_pca(latents);

  const Eigen::Vector3d v(0.1, 0.2, 0.3);
  CHECK((pca_project(p, pca_lift(p, v)) - v).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(pca_project(p, p.mean).cwiseAbs().maxCoeff() < 1e-9);

  // lift-project is idempotent
  const Eigen::VectorXd z = latents.row(7);
  const Eigen::VectorXd once = pca_lift(p, pca_project(p, z));
  const Eigen::VectorXd twice = pca_lift(p, pca_project(p, once));
  CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pca json round trip") {
  CounterRng rng(19);
  Mat latents(40, 6);
  rng.fill_gaussian(latents);
  const PcaProjection p = fit_pca(latents);
  save_pca_json("/tmp/timbre_pca_test.json", p);
  const PcaProjection q = load_pca_json("/tmp/timbre_pca_test.json");
  CHECK((p.basis - q.basis).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.mean - q.mean).cwiseAbs().maxCoeff() < 1e-12);
  std::remove("/tmp/timbre_pca_test.json");
}

TEST_CASE("interpolate_path: endpoints exact, steps equal") {
  Eigen::VectorXd a(3), b(3);
  a << 0, 1, 2;
  b << 1, -1, 4;
  const Mat path = interpolate_path(a, b, 6);
  REQUIRE(path.rows() == 6);
  CHECK((path.row(0).transpose() - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((path.row(5).transpose() - b).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 1; k < 6; ++k) {
    const Eigen::RowVectorXd step = path.row(k) - path.row(k - 1);
    const Eigen::RowVectorXd first = path.row(1) - path.row(0);
    CHECK((step - first).cwiseAbs().maxCoeff() < 1e-12);
  }
  // interior at fractions 1/5 .. 4/5
  CHECK(path(1, 0) == doctest::Approx(0.2));
  CHECK(path(4, 2) == doctest::Approx(2.0 + 0.8 * 2.0));

  const Mat self_path = interpolate_path(a, a, 5);
  CHECK((self_path.row(2).transpose() - a).cwiseAbs().maxCoeff() == 0.0);
  const Mat two = interpolate_path(a, b, 2);
  CHECK((two.row(1).transpose() - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_set: duplicates collapse, empty input rejected") {
  const VaeModel model = tiny_model(10, 4, 3);
  Eigen::MatrixXf frames(3, 10);
  frames.setConstant(0.2f);
  const EncodedSet set = encode_set(model, frames);
  CHECK(set.mu.rows() == 3);
  CHECK((set.mu.row(0) - set.mu.row(2)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((set.centroid - set.mu.row(0)).cwiseAbs().maxCoeff() < 1e-6f);
  CHECK_THROWS_AS(encode_set(model, Eigen::MatrixXf(0, 10)), EmptySplit);
}

TEST_CASE("render_magnitude_frames: constant path gives a stationary spectrum") {
  TransformSpec spec = TransformSpec::from_name("nsgt-erb");
  Eigen::MatrixXd frames(4, 400);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 400; ++k)
      frames(i, k) = std::exp(-0.002 * (k - 120) * (k - 120));
  const RenderResult r = render_magnitude_frames(frames, spec, 25.0, 8);
  CHECK(r.audio.samples.size() > 0);
  CHECK(r.audio.samples.allFinite());
  // identical rows tile into identical magnitude columns
  const auto& m = r.magnitudes.coeffs;
  double worst = 0;
  for (Eigen::Index t = 1; t < m.cols(); ++t)
    worst = std::max(worst, (m.col(t) - m.col(0)).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-12);
}

TEST_CASE("render_path: endpoint frames equal direct decodes") {
  const VaeModel model = tiny_model(400, 6, 5);
  Eigen::MatrixXf waypoints(3, 6);
  CounterRng rng(7);
  rng.fill_gaussian(waypoints);
  const double norm = 2.5;
  TransformSpec spec = TransformSpec::from_name("nsgt-erb");
  const RenderResult r = render_path(model, waypoints, spec, norm, 25.0, 4);
  const Eigen::MatrixXf direct = decode(model, waypoints);
  const Eigen::MatrixXd want = direct.cast<double>() * norm;
  CHECK((r.frame_rows - want).cwiseAbs().maxCoeff() < 1e-9);
  // audio length close to waypoints * frame duration (padded to a fast size)
  const double seconds = double(r.audio.samples.size()) / spec.sample_rate;
  CHECK(seconds >= 3 * 0.025 - 1e-6);
  CHECK(seconds <= 3 * 0.025 + 0.05);
}

TEST_CASE("descriptor_grid: smoke run produces finite fields") {
  const VaeModel model = tiny_model(400, 8, 9);
  CounterRng rng(10);
  Mat latents(30, 8);
  rng.fill_gaussian(latents);
  const PcaProjection pca = fit_pca(latents);
  TransformSpec spec = TransformSpec::from_name("nsgt-erb");
  const DescriptorGrid grid =
      descriptor_grid(model, pca, spec, {-0.5, 0.5}, 2, 1.0);
  REQUIRE(grid.centroid.size() == 2);
  REQUIRE(grid.bandwidth.size() == 2);
  for (const auto& field : grid.centroid) {
    CHECK(field.rows() == 2);
    CHECK(field.allFinite());
    CHECK(field.minCoeff() >= 0.0);
  }
  for (const auto& field : grid.bandwidth) CHECK(field.allFinite());
  CHECK(std::isfinite(grid_local_smoothness(grid.centroid[0])));
}

TEST_CASE("descriptors: exact small cases") {
  TransformSpec stft = TransformSpec::from_name("stft");
  const Eigen::VectorXd freqs = bin_frequencies(stft);
  CHECK(freqs[1] == doctest::Approx(25.0));  // 22050 / 882

  Eigen::VectorXd f(3), m(3);
  f << 100, 300, 500;
  m << 1, 1, 0;
  CHECK(spectral_centroid(m, f) == doctest::Approx(200.0));
  CHECK(spectral_bandwidth(m, f) == doctest::Approx(100.0));

  Eigen::VectorXd single(3);
  single << 0, 2, 0;
  CHECK(spectral_centroid(single, f) == doctest::Approx(300.0));
  CHECK(spectral_bandwidth(single, f) == doctest::Approx(0.0));

  // scale invariance
  CHECK(spectral_centroid(5.0 * m, f) == doctest::Approx(200.0).epsilon(1e-9));
  CHECK(spectral_bandwidth(5.0 * m, f) ==
        doctest::Approx(spectral_bandwidth(m, f)).epsilon(1e-9));

  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(spectral_centroid(zeros, f), UndefinedDescriptor);

  // brute-force oracle on a random frame
  CounterRng rng(77);
  Eigen::VectorXd mm(64), ff(64);
  rng.fill_uniform(mm, 0.0, 1.0);
  for (int i = 0; i < 64; ++i) ff[i] = 30.0 * std::pow(1.09, i);
  double num = 0, den = 0;
  for (int i = 0; i < 64; ++i) {
    num += mm[i] * ff[i];
    den += mm[i];
  }
  const double want_c = num / den;
  double var = 0;
  for (int i = 0; i < 64; ++i) var += mm[i] * (ff[i] - want_c) * (ff[i] - want_c);
  var /= den;
  CHECK(spectral_centroid(mm, ff) == doctest::Approx(want_c).epsilon(1e-12));
  CHECK(spectral_bandwidth(mm, ff) ==
        doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}
