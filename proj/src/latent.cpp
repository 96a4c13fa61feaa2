#include "timbre/latent.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "timbre/descriptors.hpp"
#include "timbre/errors.hpp"

namespace timbre {

PcaProjection fit_pca(const Eigen::MatrixXd& latents) {
  const Eigen::Index n = latents.rows(), d = latents.cols();
  if (n < 4) throw FormatError("PCA needs at least four points");
  if (d < 3) throw FormatError("latent dimensionality below 3");

  PcaProjection p;
  p.mean = latents.colwise().mean().transpose();
  const Eigen::MatrixXd centered = latents.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error("eigendecomposition failed in PCA");

  p.total_variance = solver.eigenvalues().sum();
  p.basis.resize(d, 3);
  p.explained.resize(3);
  int positive = 0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Index src = d - 1 - k;  // ascending order from the solver
    p.basis.col(k) = solver.eigenvectors().col(src);
    p.explained[k] = std::max(0.0, solver.eigenvalues()[src]);
    if (solver.eigenvalues()[src] > 1e-12) ++positive;
  }
  if (positive < 3)
    std::cerr << "fit_pca: only " << positive
              << " positive-variance directions; padded orthonormally\n";

  // deterministic orientation: largest-magnitude loading positive
  for (int k = 0; k < 3; ++k) {
    Eigen::Index argmax;
    p.basis.col(k).cwiseAbs().maxCoeff(&argmax);
    if (p.basis(argmax, k) < 0) p.basis.col(k) = -p.basis.col(k);
  }
  return p;
}

Eigen::Vector3d pca_project(const PcaProjection& p, const Eigen::VectorXd& z) {
  return p.basis.transpose() * (z - p.mean);
}

Eigen::VectorXd pca_lift(const PcaProjection& p, const Eigen::Vector3d& xyz) {
  return p.mean + p.basis * xyz;
}

Eigen::MatrixXd pca_project_rows(const PcaProjection& p,
                                 const Eigen::MatrixXd& latents) {
  return (latents.rowwise() - p.mean.transpose()) * p.basis;
}

void save_pca_json(const std::string& path, const PcaProjection& p) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size());
  auto& basis = j["basis"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < 3; ++c)
    basis.push_back(std::vector<double>(p.basis.col(c).data(),
                                        p.basis.col(c).data() + p.basis.rows()));
  j["explained"] = std::vector<double>(p.explained.data(), p.explained.data() + 3);
  j["total_variance"] = p.total_variance;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << "\n";
}

PcaProjection load_pca_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  PcaProjection p;
  const auto mean = j["mean"].get<std::vector<double>>();
  p.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
  p.basis.resize(p.mean.size(), 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const auto col = j["basis"][size_t(c)].get<std::vector<double>>();
    p.basis.col(c) =
        Eigen::Map<const Eigen::VectorXd>(col.data(), Eigen::Index(col.size()));
  }
  const auto expl = j["explained"].get<std::vector<double>>();
  p.explained = Eigen::Map<const Eigen::VectorXd>(expl.data(), 3);
  p.total_variance = j["total_variance"].get<double>();
  return p;
}

Eigen::MatrixXd interpolate_path(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, int n) {
  if (n < 2) throw FormatError("a path needs at least two points");
  if (a.size() != b.size()) throw ShapeError("endpoint dimensions differ");
  Eigen::MatrixXd path(n, a.size());
  for (int k = 0; k < n; ++k) {
    const double t = double(k) / double(n - 1);
    path.row(k) = ((1.0 - t) * a + t * b).transpose();
  }
  return path;
}

EncodedSet encode_set(const VaeModel& model, const Eigen::MatrixXf& frames) {
  if (frames.rows() == 0) throw EmptySplit("no frames to encode");
  EncodedSet out;
  out.mu = encode(model, frames).first;
  out.centroid = out.mu.colwise().mean();
  return out;
}

RenderResult render_magnitude_frames(const Eigen::MatrixXd& frame_rows,
                                     const TransformSpec& spec, double frame_ms,
                                     int gl_iterations,
                                     const std::uint64_t* phase_seed) {
  if (frame_rows.rows() == 0) throw EmptyTarget("no frames to render");
  const Eigen::Index n = frame_rows.rows();
  const double sr = spec.sample_rate;
  long len = next_fast_len(long(std::ceil(n * frame_ms * 1e-3 * sr)));
  if (spec.kind != TransformKind::Nsgt) {
    const long min_len = spec.window_samples();
    len = std::max(len, next_fast_len(min_len));
  }

  const SpectralTransform tf(spec, len);
  const Eigen::Index cols = tf.frame_count();
  Eigen::MatrixXd mags(tf.frame_len(), cols);
  for (Eigen::Index t = 0; t < cols; ++t) {
    const Eigen::Index w = std::min<Eigen::Index>(n - 1, t * n / cols);
    mags.col(t) = frame_rows.row(w).transpose();
  }

  RenderResult result;
  result.frame_rows = frame_rows;
  result.magnitudes = tf.magnitude_spectrogram(mags);
  auto gl = griffin_lim(result.magnitudes, tf, gl_iterations, phase_seed);
  result.audio = std::move(gl.audio);
  return result;
}

RenderResult render_path(const VaeModel& model, const Eigen::MatrixXf& waypoints,
                         const TransformSpec& spec, double norm_constant,
                         double frame_ms, int gl_iterations,
                         const std::uint64_t* phase_seed) {
  const Eigen::MatrixXf decoded = decode(model, waypoints);
  return render_magnitude_frames(decoded.cast<double>() * norm_constant, spec,
                                 frame_ms, gl_iterations, phase_seed);
}

DescriptorGrid descriptor_grid(const VaeModel& model, const PcaProjection& pca,
                               const TransformSpec& spec,
                               const std::vector<double>& planes, int size,
                               double range) {
  if (size < 2) throw FormatError("grid size must be at least 2");
  const Eigen::VectorXd freqs = bin_frequencies(spec);
  if (freqs.size() != model.d_x)
    throw PlanMismatch("transform bins do not match the decoder width");

  DescriptorGrid grid;
  grid.planes = planes;
  grid.size = size;
  grid.range = range;
  const auto level = [&](int i) {
    return -range + 2.0 * range * double(i) / double(size - 1);
  };

  for (const double x : planes) {
    Eigen::MatrixXf lifted(size * size, model.d_z);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        lifted.row(i * size + j) =
            pca_lift(pca, Eigen::Vector3d(x, level(i), level(j)))
                .cast<float>()
                .transpose();
    const Eigen::MatrixXf decoded = decode(model, lifted);
    Eigen::MatrixXd cent(size, size), band(size, size);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const Eigen::VectorXd m =
            decoded.row(i * size + j).transpose().cast<double>();
        cent(i, j) = spectral_centroid(m, freqs);
        band(i, j) = spectral_bandwidth(m, freqs);
      }
    grid.centroid.push_back(std::move(cent));
    grid.bandwidth.push_back(std::move(band));
  }
  return grid;
}

double grid_local_smoothness(const Eigen::MatrixXd& field) {
  std::vector<double> diffs;
  for (Eigen::Index i = 0; i < field.rows(); ++i)
    for (Eigen::Index j = 0; j < field.cols(); ++j) {
      if (i + 1 < field.rows())
        diffs.push_back(std::abs(field(i, j) - field(i + 1, j)));
      if (j + 1 < field.cols())
        diffs.push_back(std::abs(field(i, j) - field(i, j + 1)));
    }
  if (diffs.empty()) return 0.0;
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return diffs[diffs.size() / 2];
}

}  // namespace timbre
