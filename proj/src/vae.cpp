#include "timbre/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>

#include "timbre/binio.hpp"
#include "timbre/errors.hpp"
#include "timbre/regularizer.hpp"

namespace timbre {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXf relu_rows(Eigen::MatrixXf m) { return m.cwiseMax(0.0f); }

Eigen::MatrixXf linear(const Eigen::MatrixXf& x, const Eigen::MatrixXf& w,
                       const Eigen::MatrixXf& b) {
  Eigen::MatrixXf out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

float softplus_stable(float x) {
  return std::max(x, 0.0f) + float(std::log1p(std::exp(-std::abs(double(x)))));
}

void check_finite(const Eigen::MatrixXf& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteInput(std::string(what) + " is not finite");
}

}  // namespace

void TrainConfig::validate() const {
  if (beta_final < 0 || alpha < 0)
    throw FormatError("beta_final and alpha must be non-negative");
  if (stage1_epochs <= 0 || stage2_epochs < 0 || warmup_epochs < 0)
    throw FormatError("epoch counts must be positive");
  if (batch_size <= 0 || latent_dims <= 0 || hidden_units <= 0 ||
      hidden_layers <= 0)
    throw FormatError("model dimensions must be positive");
  if (learning_rate <= 0) throw FormatError("learning rate must be positive");
  if (ll_samples <= 0) throw FormatError("ll_samples must be positive");
}

VaeModel VaeModel::init(int d_x, const TrainConfig& cfg, CounterRng& rng) {
  VaeModel m;
  m.d_x = d_x;
  m.d_z = cfg.latent_dims;
  m.hidden = cfg.hidden_units;
  m.layers = cfg.hidden_layers;
  auto he_uniform = [&rng](int rows, int cols) {
    const double bound = std::sqrt(6.0 / double(rows));
    Eigen::MatrixXf w(rows, cols);
    rng.fill_uniform(w, -bound, bound);
    return w;
  };
  auto zeros = [](int cols) { return Eigen::MatrixXf::Zero(1, cols); };

  for (int i = 0; i < m.layers; ++i) {
    const int in = i == 0 ? m.d_x : m.hidden;
    m.params.push_back(he_uniform(in, m.hidden));
    m.params.push_back(zeros(m.hidden));
  }
  m.params.push_back(he_uniform(m.hidden, m.d_z));  // W_mu
  m.params.push_back(zeros(m.d_z));
  m.params.push_back(he_uniform(m.hidden, m.d_z));  // W_logvar
  m.params.push_back(zeros(m.d_z));
  for (int i = 0; i < m.layers; ++i) {
    const int in = i == 0 ? m.d_z : m.hidden;
    m.params.push_back(he_uniform(in, m.hidden));
    m.params.push_back(zeros(m.hidden));
  }
  m.params.push_back(he_uniform(m.hidden, m.d_x));  // W_out
  m.params.push_back(zeros(m.d_x));
  return m;
}

std::vector<Eigen::MatrixXf*> VaeModel::param_ptrs() {
  std::vector<Eigen::MatrixXf*> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(&p);
  return out;
}

std::pair<Eigen::MatrixXf, Eigen::MatrixXf> encode(const VaeModel& model,
                                                   const Eigen::MatrixXf& x) {
  if (x.cols() != model.d_x) throw ShapeError("input width must equal d_x");
  check_finite(x, "encoder input");
  Eigen::MatrixXf h = x;
  for (int i = 0; i < model.layers; ++i)
    h = relu_rows(linear(h, model.params[size_t(2 * i)],
                         model.params[size_t(2 * i + 1)]));
  const int head = 2 * model.layers;
  return {linear(h, model.params[size_t(head)], model.params[size_t(head + 1)]),
          linear(h, model.params[size_t(head + 2)],
                 model.params[size_t(head + 3)])};
}

Eigen::MatrixXf decode(const VaeModel& model, const Eigen::MatrixXf& z) {
  if (z.cols() != model.d_z) throw ShapeError("latent width must equal d_z");
  check_finite(z, "decoder input");
  Eigen::MatrixXf h = z;
  const int base = 2 * model.layers + 4;
  for (int i = 0; i < model.layers; ++i)
    h = relu_rows(linear(h, model.params[size_t(base + 2 * i)],
                         model.params[size_t(base + 2 * i + 1)]));
  const int out = 4 * model.layers + 4;
  Eigen::MatrixXf y = linear(h, model.params[size_t(out)],
                             model.params[size_t(out + 1)]);
  return y.unaryExpr(&softplus_stable);
}

ElboValue elbo_loss(const VaeModel& model, const Eigen::MatrixXf& x,
                    double beta, CounterRng& rng) {
  auto [mu, lv] = encode(model, x);
  Eigen::MatrixXf eps(mu.rows(), mu.cols());
  rng.fill_gaussian(eps);
  const Eigen::MatrixXf z =
      mu + (lv.array() * 0.5f).exp().matrix().cwiseProduct(eps);
  const Eigen::MatrixXf x_hat = decode(model, z);
  const double inv_b = 1.0 / double(x.rows());
  ElboValue v;
  v.recon = 0.5 * inv_b * (x_hat - x).cast<double>().squaredNorm();
  v.kl = 0.5 * inv_b *
         (mu.cast<double>().array().square() +
          lv.cast<double>().array().exp() - lv.cast<double>().array() - 1.0)
             .sum();
  v.loss = v.recon + beta * v.kl;
  return v;
}

double warmup_beta(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw FormatError("epoch must be non-negative");
  if (cfg.warmup_epochs <= 0) return cfg.beta_final;
  return cfg.beta_final *
         std::min(1.0, double(epoch) / double(cfg.warmup_epochs));
}

std::string metrics_csv_header() {
  return "epoch,stage,beta,alpha,recon,kl,reg,test_recon,test_ll";
}

std::string metrics_csv_row(const TrainMetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.8e,%.8e,%.8e,%.8e,",
                row.epoch, row.stage, row.beta, row.alpha, row.recon, row.kl,
                row.reg, row.test_recon);
  std::string s(buf);
  if (row.test_ll) {
    std::snprintf(buf, sizeof buf, "%.8e", *row.test_ll);
    s += buf;
  }
  return s;
}

namespace {

struct SplitData {
  Eigen::MatrixXf x;
  std::vector<int> labels;  // index into class_names
};

SplitData gather_split(const FrameStore& store, const std::string& split,
                       const std::map<std::string, int>& class_index) {
  const auto rows = store.split_indices(split);
  SplitData d;
  d.x.resize(Eigen::Index(rows.size()), store.frames.cols());
  for (Eigen::Index i = 0; i < Eigen::Index(rows.size()); ++i) {
    d.x.row(i) = store.frames.row(rows[size_t(i)]);
    d.labels.push_back(
        class_index.at(store.meta[size_t(rows[size_t(i)])].class_label));
  }
  return d;
}

/// Round-robin over per-class shuffled queues so every batch of size >=
/// n_classes sees every class; order is deterministic in the rng stream.
std::vector<int> stratified_order(const std::vector<int>& labels, int n_classes,
                                  CounterRng& rng) {
  std::vector<std::vector<int>> per_class(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < int(labels.size()); ++i)
    per_class[size_t(labels[size_t(i)])].push_back(i);
  std::vector<int> class_order;
  for (int c = 0; c < n_classes; ++c)
    if (!per_class[size_t(c)].empty()) class_order.push_back(c);
  rng.shuffle(class_order);
  for (int c : class_order) rng.shuffle(per_class[size_t(c)]);

  std::vector<int> order;
  order.reserve(labels.size());
  std::vector<std::size_t> cursor(static_cast<std::size_t>(n_classes), 0);
  bool any = true;
  while (any) {
    any = false;
    for (int c : class_order) {
      auto& queue = per_class[size_t(c)];
      if (cursor[size_t(c)] < queue.size()) {
        order.push_back(queue[cursor[size_t(c)]++]);
        any = true;
      }
    }
  }
  return order;
}

}  // namespace

TrainResult train_vae(const FrameStore& store, const TimbreTarget* target,
                      const TrainConfig& cfg, const EpochHook& on_epoch) {
  cfg.validate();
  const std::vector<std::string> class_names = store.class_list();
  std::map<std::string, int> class_index;
  for (int i = 0; i < int(class_names.size()); ++i)
    class_index[class_names[size_t(i)]] = i;

  const SplitData train = gather_split(store, "train", class_index);
  const SplitData test = gather_split(store, "test", class_index);
  if (train.x.rows() == 0) throw EmptySplit("training split is empty");

  // target rows aligned with class ids; required only when alpha > 0
  std::vector<int> target_row(class_names.size(), -1);
  if (cfg.alpha > 0 && cfg.stage2_epochs > 0) {
    if (target == nullptr)
      throw UnknownClass("stage 2 requires a target space");
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      target_row[c] = target->index_of(class_names[c]);
      if (target_row[c] < 0)
        throw UnknownClass("class '" + class_names[c] +
                           "' is missing from the target space");
    }
  }

  CounterRng root(cfg.seed);
  CounterRng init_rng = root.substream("init");
  CounterRng batch_rng = root.substream("batch");
  CounterRng eps_rng = root.substream("eps");

  TrainResult result;
  result.model = VaeModel::init(int(store.frames.cols()), cfg, init_rng);
  result.optimizer.learning_rate = cfg.learning_rate;
  result.optimizer.init(result.model.param_ptrs());

  const int n_classes = int(class_names.size());
  const int total_epochs = cfg.stage1_epochs + cfg.stage2_epochs;
  VaeModel last_good = result.model;

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const int stage = epoch < cfg.stage1_epochs ? 1 : 2;
    const double beta = warmup_beta(epoch, cfg);
    const double alpha = stage == 2 ? cfg.alpha : 0.0;

    const std::vector<int> order =
        stratified_order(train.labels, n_classes, batch_rng);
    double recon_acc = 0, kl_acc = 0, reg_acc = 0;
    long reg_batches = 0;
    bool finite = true;

    for (std::size_t start = 0; start < order.size() && finite;
         start += std::size_t(cfg.batch_size)) {
      const std::size_t b =
          std::min<std::size_t>(std::size_t(cfg.batch_size),
                                order.size() - start);
      Eigen::MatrixXf xb(Eigen::Index(b), train.x.cols());
      std::vector<int> raw_labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        xb.row(Eigen::Index(i)) = train.x.row(order[start + i]);
        raw_labels[i] = train.labels[size_t(order[start + i])];
      }
      Eigen::MatrixXf eps(Eigen::Index(b), cfg.latent_dims);
      eps_rng.fill_gaussian(eps);

      ad::TapeF tape;
      std::vector<ad::Var> pvars;
      for (auto& p : result.model.params) pvars.push_back(tape.leaf(p, true));
      const ad::Var xv = tape.constant(xb);
      auto elbo = elbo_graph<float>(tape, pvars, result.model.layers, xv,
                                    std::move(eps), float(beta));
      ad::Var loss = elbo.loss;

      double reg_val = 0;
      if (alpha > 0) {
        // compact the labels of the classes present in this batch
        std::set<int> present(raw_labels.begin(), raw_labels.end());
        if (present.size() >= 3) {
          std::map<int, int> compact;
          Eigen::MatrixXd coords(Eigen::Index(present.size()),
                                 target->coords.cols());
          for (int c : present) {
            const int idx = int(compact.size());
            coords.row(idx) = target->coords.row(target_row[size_t(c)]);
            compact[c] = idx;
          }
          std::vector<int> batch_labels(b);
          for (std::size_t i = 0; i < b; ++i)
            batch_labels[i] = compact[raw_labels[i]];
          const Eigen::MatrixXd q =
              cfg.symmetric_norm ? target_neighbor_dist_rownorm(coords)
                                 : target_neighbor_dist(coords);
          const ad::Var reps = tape.segment_mean(elbo.mu, batch_labels,
                                                 int(present.size()));
          const ad::Var reg =
              reg_loss_on_tape(tape, reps, q.cast<float>().eval());
          reg_val = double(tape.scalar(reg));
          loss = tape.add(loss, tape.scale(reg, float(alpha)));
          ++reg_batches;
        } else {
          std::cerr << "train: batch at epoch " << epoch
                    << " has fewer than 3 classes; skipping R this step\n";
        }
      }

      const double loss_val = double(tape.scalar(loss));
      if (!std::isfinite(loss_val)) {
        finite = false;
        break;
      }
      tape.backward(loss);
      std::vector<Eigen::MatrixXf> grads;
      grads.reserve(pvars.size());
      for (ad::Var v : pvars) grads.push_back(tape.grad(v));
      result.optimizer.step(result.model.param_ptrs(), grads);

      const double w = double(b) / double(order.size());
      recon_acc += w * double(tape.scalar(elbo.recon));
      kl_acc += w * double(tape.scalar(elbo.kl));
      reg_acc += reg_val * w;
    }

    if (!finite) {
      result.model = last_good;
      result.diverged = true;
      std::cerr << "train: non-finite loss at epoch " << epoch
                << "; keeping the last good snapshot\n";
      break;
    }
    last_good = result.model;
    result.completed_epochs = epoch + 1;

    TrainMetricsRow row;
    row.epoch = epoch;
    row.stage = stage;
    row.beta = beta;
    row.alpha = alpha;
    row.recon = recon_acc;
    row.kl = kl_acc;
    row.reg = reg_batches ? reg_acc : 0.0;
    if (test.x.rows() > 0) {
      const auto [mu, lv] = encode(result.model, test.x);
      row.test_recon =
          (decode(result.model, mu) - test.x).cast<double>().squaredNorm() /
          double(test.x.rows());
      const bool last_of_stage =
          epoch + 1 == cfg.stage1_epochs || epoch + 1 == total_epochs;
      if ((cfg.ll_every > 0 && (epoch + 1) % cfg.ll_every == 0) ||
          last_of_stage) {
        row.test_ll = evaluate(result.model, test.x, cfg.ll_samples,
                               CounterRng::mix64(cfg.seed ^ 0x11ULL) + epoch)
                          .log_likelihood;
      }
    }
    result.metrics.push_back(row);

    if (epoch + 1 == cfg.stage1_epochs) result.stage1_model = result.model;
    if (on_epoch) on_epoch(epoch, result.model);
  }
  if (cfg.stage2_epochs == 0 || result.completed_epochs < cfg.stage1_epochs)
    result.stage1_model = result.model;
  return result;
}

EvalResult evaluate(const VaeModel& model, const Eigen::MatrixXf& test_x,
                    int importance_samples, std::uint64_t seed) {
  if (test_x.rows() == 0) throw EmptySplit("evaluation split is empty");
  CounterRng rng(seed, CounterRng::tag("eval-ll"));
  const auto [mu, lv] = encode(model, test_x);
  EvalResult out;
  out.mean_sq_err =
      (decode(model, mu) - test_x).cast<double>().squaredNorm() /
      double(test_x.rows());

  const int d_z = model.d_z, d_x = model.d_x;
  double ll_sum = 0;
  Eigen::MatrixXf eps(1, d_z);
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    const Eigen::RowVectorXf mu_i = mu.row(i), lv_i = lv.row(i);
    const Eigen::RowVectorXf sigma_i = (lv_i.array() * 0.5f).exp();
    std::vector<double> log_w(static_cast<std::size_t>(importance_samples));
    for (int k = 0; k < importance_samples; ++k) {
      rng.fill_gaussian(eps);
      const Eigen::RowVectorXf z = mu_i + sigma_i.cwiseProduct(eps.row(0));
      const Eigen::RowVectorXf x_hat = decode(model, z);
      const double log_px_z =
          -0.5 * (x_hat - test_x.row(i)).cast<double>().squaredNorm() -
          0.5 * d_x * kLog2Pi;
      const double log_pz =
          -0.5 * z.cast<double>().squaredNorm() - 0.5 * d_z * kLog2Pi;
      const double log_qz =
          -0.5 * (eps.row(0).cast<double>().squaredNorm() +
                  lv_i.cast<double>().sum()) -
          0.5 * d_z * kLog2Pi;
      log_w[size_t(k)] = log_px_z + log_pz - log_qz;
    }
    const double mx = *std::max_element(log_w.begin(), log_w.end());
    double acc = 0;
    for (double w : log_w) acc += std::exp(w - mx);
    ll_sum += mx + std::log(acc / importance_samples);
  }
  out.log_likelihood = ll_sum / double(test_x.rows());
  return out;
}

namespace {

void write_matrix(std::ostream& os, const Eigen::MatrixXf& m) {
  write_le<std::uint32_t>(os, std::uint32_t(m.rows()));
  write_le<std::uint32_t>(os, std::uint32_t(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_le<float>(os, m(r, c));
}

Eigen::MatrixXf read_matrix(std::istream& is) {
  const auto rows = read_le<std::uint32_t>(is);
  const auto cols = read_le<std::uint32_t>(is);
  Eigen::MatrixXf m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = read_le<float>(is);
  return m;
}

void write_config(std::ostream& os, const TrainConfig& c) {
  write_le<double>(os, c.beta_final);
  write_le<std::int32_t>(os, c.warmup_epochs);
  write_le<double>(os, c.alpha);
  write_le<std::int32_t>(os, c.stage1_epochs);
  write_le<std::int32_t>(os, c.stage2_epochs);
  write_le<double>(os, c.learning_rate);
  write_le<std::int32_t>(os, c.batch_size);
  write_le<std::uint64_t>(os, c.seed);
  write_le<std::int32_t>(os, c.latent_dims);
  write_le<std::int32_t>(os, c.hidden_units);
  write_le<std::int32_t>(os, c.hidden_layers);
  write_le<std::uint8_t>(os, c.symmetric_norm ? 1 : 0);
  write_le<std::int32_t>(os, c.ll_every);
  write_le<std::int32_t>(os, c.ll_samples);
  write_le<std::int32_t>(os, c.checkpoint_every);
}

TrainConfig read_config(std::istream& is) {
  TrainConfig c;
  c.beta_final = read_le<double>(is);
  c.warmup_epochs = read_le<std::int32_t>(is);
  c.alpha = read_le<double>(is);
  c.stage1_epochs = read_le<std::int32_t>(is);
  c.stage2_epochs = read_le<std::int32_t>(is);
  c.learning_rate = read_le<double>(is);
  c.batch_size = read_le<std::int32_t>(is);
  c.seed = read_le<std::uint64_t>(is);
  c.latent_dims = read_le<std::int32_t>(is);
  c.hidden_units = read_le<std::int32_t>(is);
  c.hidden_layers = read_le<std::int32_t>(is);
  c.symmetric_norm = read_le<std::uint8_t>(is) != 0;
  c.ll_every = read_le<std::int32_t>(is);
  c.ll_samples = read_le<std::int32_t>(is);
  c.checkpoint_every = read_le<std::int32_t>(is);
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt,
                     const AdamState<float>* optimizer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_magic(os, "TSVAE1");
  write_le<std::uint32_t>(os, 1);  // version
  write_le<std::uint64_t>(os, ckpt.spec_hash);
  write_le<double>(os, ckpt.norm_constant);
  write_le<std::int32_t>(os, ckpt.model.d_x);
  write_le<std::int32_t>(os, ckpt.model.d_z);
  write_le<std::int32_t>(os, ckpt.model.hidden);
  write_le<std::int32_t>(os, ckpt.model.layers);
  write_le<std::int32_t>(os, ckpt.epoch);
  write_le<std::int32_t>(os, ckpt.stage);
  write_config(os, ckpt.config);
  write_le<std::uint32_t>(os, std::uint32_t(ckpt.class_names.size()));
  for (const auto& name : ckpt.class_names) write_string(os, name);
  write_le<std::uint32_t>(os, std::uint32_t(ckpt.model.params.size()));
  for (const auto& p : ckpt.model.params) write_matrix(os, p);
  write_le<std::uint8_t>(os, optimizer ? 1 : 0);
  if (optimizer) {
    write_le<std::int64_t>(os, optimizer->step_count);
    write_le<std::int64_t>(os, optimizer->skipped_steps);
    for (const auto& m : optimizer->m) write_matrix(os, m);
    for (const auto& v : optimizer->v) write_matrix(os, v);
  }
  if (!os) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  expect_magic(is, "TSVAE1");
  const auto version = read_le<std::uint32_t>(is);
  if (version != 1) throw FormatError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.spec_hash = read_le<std::uint64_t>(is);
  ckpt.norm_constant = read_le<double>(is);
  ckpt.model.d_x = read_le<std::int32_t>(is);
  ckpt.model.d_z = read_le<std::int32_t>(is);
  ckpt.model.hidden = read_le<std::int32_t>(is);
  ckpt.model.layers = read_le<std::int32_t>(is);
  ckpt.epoch = read_le<std::int32_t>(is);
  ckpt.stage = read_le<std::int32_t>(is);
  ckpt.config = read_config(is);
  const auto n_classes = read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_classes; ++i)
    ckpt.class_names.push_back(read_string(is));
  const auto n_tensors = read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i)
    ckpt.model.params.push_back(read_matrix(is));
  if (int(n_tensors) != ckpt.model.tensor_count())
    throw FormatError("tensor count mismatch in " + path);
  return ckpt;
}

}  // namespace timbre
