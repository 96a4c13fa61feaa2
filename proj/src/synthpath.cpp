#include "timbre/synthpath.hpp"

#include <cmath>

#include "timbre/descriptors.hpp"
#include "timbre/errors.hpp"
#include "timbre/rng.hpp"

namespace timbre {

DescriptorKind descriptor_kind_from_name(const std::string& name) {
  if (name == "centroid") return DescriptorKind::Centroid;
  if (name == "bandwidth") return DescriptorKind::Bandwidth;
  throw FormatError("unknown descriptor '" + name + "'");
}

TargetSeries target_from_shape(const Eigen::VectorXd& shape, double origin_value,
                               double span_hz, DescriptorKind kind) {
  if (shape.size() == 0) throw EmptyTarget("empty target shape");
  TargetSeries t;
  t.kind = kind;
  t.values = (shape.array() - shape[0]) * span_hz + origin_value;
  return t;
}

namespace {

double eval_descriptor(const Eigen::VectorXd& mags, const Eigen::VectorXd& freqs,
                       DescriptorKind kind) {
  return kind == DescriptorKind::Centroid ? spectral_centroid(mags, freqs)
                                          : spectral_bandwidth(mags, freqs);
}

}  // namespace

SynthResult descriptor_synth(const VaeModel& model,
                             const Eigen::VectorXf& origin_frame,
                             const TargetSeries& target,
                             const NeighborhoodSpec& nbh,
                             const PcaProjection& pca,
                             const TransformSpec& spec, double norm_constant,
                             std::uint64_t seed) {
  if (target.values.size() < 1) throw EmptyTarget("target series is empty");
  if (nbh.count < 2 || nbh.radius <= 0)
    throw FormatError("neighborhood needs radius > 0 and count >= 2");
  const Eigen::VectorXd freqs = bin_frequencies(spec);
  if (freqs.size() != model.d_x)
    throw PlanMismatch("transform bins do not match the decoder width");

  const int n_steps = int(target.values.size());
  CounterRng rng(seed, CounterRng::tag("desc-synth"));

  SynthResult result;
  result.path.resize(n_steps + 1, model.d_z);
  result.achieved.resize(n_steps + 1);
  result.target.resize(n_steps + 1);
  result.chosen_delta.resize(n_steps);
  result.spectra.resize(n_steps, model.d_x);

  // origin position and descriptor (evaluated on the input spectrum itself)
  const Eigen::MatrixXf mu =
      encode(model, Eigen::MatrixXf(origin_frame.transpose())).first;
  result.path.row(0) = mu.row(0);
  result.achieved[0] =
      eval_descriptor(origin_frame.cast<double>(), freqs, target.kind);
  result.target[0] = result.achieved[0];
  result.target.tail(n_steps) = target.values;

  Eigen::RowVectorXf current = mu.row(0);
  double current_desc = result.achieved[0];

  for (int i = 1; i <= n_steps; ++i) {
    // candidate 0 is the current point itself
    Eigen::MatrixXf candidates(nbh.count + 1, model.d_z);
    candidates.row(0) = current;
    for (int k = 1; k <= nbh.count; ++k) {
      if (nbh.pca_subspace) {
        Eigen::Vector3d g(rng.gaussian(), rng.gaussian(), rng.gaussian());
        candidates.row(k) =
            current + (pca.basis * (nbh.radius * g)).cast<float>().transpose();
      } else {
        Eigen::RowVectorXf g(model.d_z);
        rng.fill_gaussian(g);
        candidates.row(k) = current + float(nbh.radius) * g;
      }
    }

    const Eigen::MatrixXf decoded = decode(model, candidates);
    const double want = result.target[i] - result.target[i - 1];
    int best = -1;
    double best_delta = 0, best_desc = 0;
    for (int k = 0; k <= nbh.count; ++k) {
      double d;
      try {
        d = eval_descriptor(decoded.row(k).transpose().cast<double>(), freqs,
                            target.kind);
      } catch (const UndefinedDescriptor&) {
        continue;  // candidate discarded
      }
      const double delta = (d - current_desc) - want;
      if (best < 0 || delta * delta < best_delta) {
        best = k;
        best_delta = delta * delta;
        best_desc = d;
      }
    }
    if (best < 0)
      throw StuckAtStep("every candidate was discarded at step " +
                        std::to_string(i));

    current = candidates.row(best);
    current_desc = best_desc;
    result.path.row(i) = current;
    result.achieved[i] = best_desc;
    result.chosen_delta[i - 1] = best_delta;
    result.spectra.row(i - 1) =
        decoded.row(best).cast<double>() * norm_constant;
  }
  return result;
}

RenderResult render_synth(const SynthResult& result, const TransformSpec& spec,
                          double frame_ms, int gl_iterations,
                          const std::uint64_t* phase_seed) {
  if (result.spectra.rows() == 0) throw EmptyTarget("nothing to render");
  return render_magnitude_frames(result.spectra, spec, frame_ms, gl_iterations,
                                 phase_seed);
}

}  // namespace timbre
