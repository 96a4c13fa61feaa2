#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "timbre/autodiff.hpp"
#include "timbre/frames.hpp"
#include "timbre/optimizer.hpp"
#include "timbre/ratings.hpp"
#include "timbre/rng.hpp"

namespace timbre {

struct TrainConfig {
  double beta_final = 2.0;
  int warmup_epochs = 100;
  double alpha = 0.1;
  int stage1_epochs = 5000;
  int stage2_epochs = 1000;
  double learning_rate = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 1;
  int latent_dims = 64;
  int hidden_units = 2000;
  int hidden_layers = 3;
  bool symmetric_norm = false;  // row-normalize the target distances
  int ll_every = 50;            // test log-likelihood cadence (epochs)
  int ll_samples = 64;          // importance samples per datum
  int checkpoint_every = 0;     // 0: stage boundaries only

  void validate() const;
};

/// Encoder/decoder parameters in one flat list. Layout (layers = L):
///   [0 .. 2L)          encoder W_i (in x hidden), b_i (1 x hidden)
///   [2L .. 2L+4)       W_mu, b_mu, W_logvar, b_logvar
///   [2L+4 .. 4L+4)     decoder W_i, b_i
///   [4L+4 .. 4L+6)     W_out (hidden x d_x), b_out (1 x d_x)
struct VaeModel {
  int d_x = 0;
  int d_z = 64;
  int hidden = 2000;
  int layers = 3;
  std::vector<Eigen::MatrixXf> params;

  static VaeModel init(int d_x, const TrainConfig& cfg, CounterRng& rng);
  std::vector<Eigen::MatrixXf*> param_ptrs();

  int tensor_count() const { return 4 * layers + 6; }
};

/// Tape builders shared by training (float) and the finite-difference
/// oracles (double). `params` must follow the VaeModel layout.
template <class S>
std::pair<ad::Var, ad::Var> encoder_graph(ad::Tape<S>& tape,
                                          const std::vector<ad::Var>& params,
                                          int layers, ad::Var x) {
  ad::Var h = x;
  for (int i = 0; i < layers; ++i)
    h = tape.relu(tape.add_rowvec(tape.matmul(h, params[size_t(2 * i)]),
                                  params[size_t(2 * i + 1)]));
  const int head = 2 * layers;
  ad::Var mu = tape.add_rowvec(tape.matmul(h, params[size_t(head)]),
                               params[size_t(head + 1)]);
  ad::Var lv = tape.add_rowvec(tape.matmul(h, params[size_t(head + 2)]),
                               params[size_t(head + 3)]);
  return {mu, lv};
}

template <class S>
ad::Var decoder_graph(ad::Tape<S>& tape, const std::vector<ad::Var>& params,
                      int layers, ad::Var z) {
  ad::Var h = z;
  const int base = 2 * layers + 4;
  for (int i = 0; i < layers; ++i)
    h = tape.relu(tape.add_rowvec(tape.matmul(h, params[size_t(base + 2 * i)]),
                                  params[size_t(base + 2 * i + 1)]));
  const int out = 4 * layers + 4;
  return tape.softplus(tape.add_rowvec(tape.matmul(h, params[size_t(out)]),
                                       params[size_t(out + 1)]));
}

template <class S>
struct ElboVars {
  ad::Var mu, log_var, z, x_hat, recon, kl, loss;
};

/// Negative ELBO pieces: recon is the unit-variance Gaussian reconstruction
/// term 0.5*|x - x_hat|^2 and kl the closed-form Gaussian KL, both averaged
/// over the batch. loss = recon + beta * kl.
template <class S>
ElboVars<S> elbo_graph(ad::Tape<S>& tape, const std::vector<ad::Var>& params,
                       int layers, ad::Var x,
                       Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> eps,
                       S beta) {
  ElboVars<S> v;
  const S inv_b = S(1) / S(tape.value(x).rows());
  std::tie(v.mu, v.log_var) = encoder_graph(tape, params, layers, x);
  v.z = tape.gaussian_sample(v.mu, v.log_var, std::move(eps));
  v.x_hat = decoder_graph(tape, params, layers, v.z);
  v.recon = tape.scale(tape.sum(tape.square(tape.sub(v.x_hat, x))),
                       S(0.5) * inv_b);
  // 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1), averaged over the batch
  ad::Var inner = tape.add_scalar(
      tape.sub(tape.add(tape.square(v.mu), tape.exp(v.log_var)), v.log_var),
      S(-1));
  v.kl = tape.scale(tape.sum(inner), S(0.5) * inv_b);
  v.loss = tape.add(v.recon, tape.scale(v.kl, beta));
  return v;
}

/// Plain (tape-free) forward passes for inference.
std::pair<Eigen::MatrixXf, Eigen::MatrixXf> encode(
    const VaeModel& model, const Eigen::MatrixXf& x);
Eigen::MatrixXf decode(const VaeModel& model, const Eigen::MatrixXf& z);

/// One-shot ELBO evaluation (single reparameterized sample drawn from rng).
struct ElboValue {
  double loss, recon, kl;
};
ElboValue elbo_loss(const VaeModel& model, const Eigen::MatrixXf& x,
                    double beta, CounterRng& rng);

/// beta_final * min(1, epoch / warmup_epochs)
double warmup_beta(int epoch, const TrainConfig& cfg);

struct TrainMetricsRow {
  int epoch = 0;
  int stage = 1;
  double beta = 0, alpha = 0, recon = 0, kl = 0, reg = 0;
  double test_recon = 0;
  std::optional<double> test_ll;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const TrainMetricsRow& row);

struct TrainResult {
  VaeModel model;
  VaeModel stage1_model;
  AdamState<float> optimizer;
  std::vector<TrainMetricsRow> metrics;
  int completed_epochs = 0;
  bool diverged = false;  // model holds the last finite-loss snapshot
};

using EpochHook = std::function<void(int epoch, const VaeModel&)>;

/// Two-stage schedule: stage 1 minimizes recon + beta*KL with linear beta
/// warm-up; stage 2 adds alpha * R against the target space. Fully
/// deterministic for a fixed config.seed. on_epoch runs after each epoch
/// (checkpoint schedules hang off it).
TrainResult train_vae(const FrameStore& store, const TimbreTarget* target,
                      const TrainConfig& cfg, const EpochHook& on_epoch = {});

struct EvalResult {
  double log_likelihood = 0;  // importance-sampled, mean over the split
  double mean_sq_err = 0;     // |x - decode(mu)|^2, mean over the split
};
EvalResult evaluate(const VaeModel& model, const Eigen::MatrixXf& test_x,
                    int importance_samples, std::uint64_t seed);

struct Checkpoint {
  VaeModel model;
  TrainConfig config;
  int epoch = 0;
  int stage = 1;
  std::uint64_t spec_hash = 0;
  double norm_constant = 1.0;
  std::vector<std::string> class_names;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt,
                     const AdamState<float>* optimizer = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace timbre
