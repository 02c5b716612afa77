#include "atp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace atp {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Activation> hidden_then(const std::vector<int>& hidden, Activation hidden_act, Activation last) {
  std::vector<Activation> acts(hidden.size(), hidden_act);
  acts.push_back(last);
  return acts;
}

std::vector<int> with_output(std::vector<int> hidden, int out) {
  hidden.push_back(out);
  return hidden;
}

void check_model_shapes(const ModelDims& dims, const KinematicChain& chain, const DenseNet& enc,
                        const DenseNet& dec) {
  require_dims(dims.dof == chain.dof(), "model dof does not match chain");
  require_dims(dims.workspace_dim == chain.workspace_dim(), "model workspace_dim does not match chain");
  require(dims.steps >= 2 && dims.k_z >= 1 && dims.k_c >= 1, "model dims must be positive (T >= 2)");
  require_dims(enc.input_dim() == dims.trajectory_size(), "encoder input must be (T+1)*dof");
  require_dims(enc.output_dim() == dims.encoder_output_size(), "encoder output size mismatch");
  require_dims(dec.input_dim() == dims.decoder_input_size(), "decoder input size mismatch");
  require_dims(dec.output_dim() == dims.trajectory_size(), "decoder output must be (T+1)*dof");
  require(dec.layers().back().activation == Activation::tanh, "decoder output layer must be tanh");
}

// Column-wise softmax and log-softmax.
void softmax_columns(const MatrixXd& logits, MatrixXd& probs, MatrixXd* log_probs) {
  probs.resize(logits.rows(), logits.cols());
  if (log_probs) log_probs->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double top = logits.col(j).maxCoeff();
    const VectorXd shifted = logits.col(j).array() - top;
    const double lse = std::log(shifted.array().exp().sum());
    const VectorXd logp = shifted.array() - lse;
    probs.col(j) = logp.array().exp();
    if (log_probs) log_probs->col(j) = logp;
  }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

AtpModel::AtpModel(KinematicChain chain, ModelDims dims, std::uint64_t seed)
    : chain_(std::move(chain)), dims_(std::move(dims)) {
  std::mt19937_64 rng(seed);
  encoder_ = DenseNet::glorot(dims_.trajectory_size(), with_output(dims_.encoder_hidden, dims_.encoder_output_size()),
                              hidden_then(dims_.encoder_hidden, dims_.hidden_activation, Activation::identity), rng);
  decoder_ = DenseNet::glorot(dims_.decoder_input_size(), with_output(dims_.decoder_hidden, dims_.trajectory_size()),
                              hidden_then(dims_.decoder_hidden, dims_.hidden_activation, Activation::tanh), rng);
  check_model_shapes(dims_, chain_, encoder_, decoder_);
}

AtpModel::AtpModel(KinematicChain chain, ModelDims dims, DenseNet encoder, DenseNet decoder)
    : chain_(std::move(chain)), dims_(std::move(dims)), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  check_model_shapes(dims_, chain_, encoder_, decoder_);
}

EncoderBatch encode_batch(const AtpModel& model, const MatrixXd& flat) {
  const auto& d = model.dims();
  const MatrixXd out = forward(model.encoder(), flat);
  EncoderBatch e;
  e.mu = out.topRows(d.k_z);
  e.log_sigma = out.middleRows(d.k_z, d.k_z);
  e.logits = out.middleRows(2 * d.k_z, d.k_c);
  e.goal = out.bottomRows(d.workspace_dim);
  return e;
}

Encoding encode(const AtpModel& model, const Trajectory& xi) {
  require_dims(xi.dof() == model.dims().dof && xi.steps() == model.dims().steps,
               "encode: trajectory shape does not match model");
  const EncoderBatch e = encode_batch(model, MatrixXd(xi.flatten()));
  return Encoding{e.mu.col(0), e.log_sigma.col(0).array().exp(), e.logits.col(0), e.goal.col(0)};
}

VectorXd reparameterize_gaussian(const VectorXd& mu, const VectorXd& sigma, const VectorXd& eps) {
  require_dims(mu.size() == sigma.size() && mu.size() == eps.size(), "reparameterize_gaussian: size mismatch");
  require((sigma.array() > 0.0).all(), "reparameterize_gaussian: sigma must be > 0");
  return mu + sigma.cwiseProduct(eps);
}

VectorXd reparameterize_gaussian(const VectorXd& mu, const VectorXd& sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd eps(mu.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  return reparameterize_gaussian(mu, sigma, eps);
}

double sample_gumbel(Rng& rng) {
  // Open interval keeps both logs finite.
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  return -std::log(-std::log(u(rng)));
}

VectorXd softmax(const VectorXd& logits) {
  MatrixXd p;
  softmax_columns(MatrixXd(logits), p, nullptr);
  return p.col(0);
}

VectorXd one_hot(int index, int size) {
  require(index >= 0 && index < size, "class index out of range");
  VectorXd v = VectorXd::Zero(size);
  v[index] = 1.0;
  return v;
}

int argmax(const VectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

VectorXd reparameterize_gumbel(const VectorXd& logits, double tau, const VectorXd& gumbel, bool hard) {
  require(tau > 0.0, "gumbel temperature must be > 0");
  require_dims(logits.size() == gumbel.size(), "reparameterize_gumbel: size mismatch");
  const VectorXd soft = softmax((logits + gumbel) / tau);
  return hard ? one_hot(argmax(soft), static_cast<int>(soft.size())) : soft;
}

VectorXd reparameterize_gumbel(const VectorXd& logits, double tau, Rng& rng, bool hard) {
  VectorXd g(logits.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = sample_gumbel(rng);
  return reparameterize_gumbel(logits, tau, g, hard);
}

MatrixXd decode_batch(const AtpModel& model, const MatrixXd& z, const MatrixXd& c, const MatrixXd& goals) {
  const auto& d = model.dims();
  require_dims(z.rows() == d.k_z && c.rows() == d.k_c && goals.rows() == d.workspace_dim,
               "decode: latent/goal dimensions do not match model");
  require_dims(z.cols() == c.cols() && z.cols() == goals.cols(), "decode: batch sizes differ");
  MatrixXd input(d.decoder_input_size(), z.cols());
  input << z, c, goals;
  return kPi * forward(model.decoder(), input);
}

Trajectory decode(const AtpModel& model, const VectorXd& z, const VectorXd& c, const VectorXd& goal) {
  require(std::abs(c.sum() - 1.0) < 1e-9 && (c.array() >= 0.0).all(), "decode: c must be a probability vector");
  const MatrixXd flat = decode_batch(model, MatrixXd(z), MatrixXd(c), MatrixXd(goal));
  return Trajectory::unflatten(flat.col(0), model.dims().dof);
}

KlGaussian kl_gaussian(const VectorXd& mu, const VectorXd& sigma) {
  require_dims(mu.size() == sigma.size(), "kl_gaussian: size mismatch");
  require((sigma.array() > 0.0).all(), "kl_gaussian: sigma must be > 0");
  KlGaussian kl;
  kl.per_unit = 0.5 * (mu.array().square() + sigma.array().square() - 1.0 - 2.0 * sigma.array().log());
  kl.total = kl.per_unit.sum();
  return kl;
}

double kl_categorical(const VectorXd& probs) {
  require(probs.size() >= 1, "kl_categorical: empty distribution");
  require((probs.array() >= 0.0).all() && std::abs(probs.sum() - 1.0) < 1e-9,
          "kl_categorical: probabilities must be >= 0 and sum to 1");
  double v = std::log(static_cast<double>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) v += probs[i] * std::log(probs[i]);
  return v;
}

double CapacitySchedule::at(long step, long total_steps) const {
  if (ramp_fraction <= 0.0 || total_steps <= 0) return max;
  const double ramp_steps = ramp_fraction * static_cast<double>(total_steps);
  return max * std::min(1.0, static_cast<double>(step) / ramp_steps);
}

void TrainingConfig::validate() const {
  require(epochs >= 1 && batch_size >= 1, "epochs and batch size must be >= 1");
  require(gamma >= 0.0, "gamma must be >= 0");
  require(cz_max >= 0.0 && (!cc_max || *cc_max >= 0.0), "capacities must be >= 0");
  require(capacity_ramp >= 0.0 && capacity_ramp <= 1.0, "capacity ramp fraction must lie in [0, 1]");
  require(tau > 0.0, "gumbel temperature must be > 0");
  require(lr_decay_from >= 0.0 && lr_decay_from <= 1.0, "lr decay start must lie in [0, 1]");
  require(lr_final > 0.0 && lr_final <= 1.0 && adam.lr > 0.0, "learning rates must be > 0");
  require(goal_weight >= 0.0 && (!recon_weight || *recon_weight >= 0.0), "loss weights must be >= 0");
}

std::string TrainingConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << epochs << '|' << batch_size << '|' << gamma << '|' << cz_max << '|' << (cc_max ? *cc_max : -1.0) << '|'
    << capacity_ramp << '|' << tau << '|' << (recon_weight ? *recon_weight : -1.0) << '|' << goal_weight << '|'
    << seed << '|' << adam.lr << '|' << adam.beta1 << '|' << adam.beta2 << '|' << adam.eps << '|' << lr_decay_from
    << '|' << lr_final;
  // FNV-1a, 64 bit.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LossNoise draw_noise(const ModelDims& dims, int batch, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  LossNoise n;
  n.eps.resize(dims.k_z, batch);
  n.gumbel.resize(dims.k_c, batch);
  for (int j = 0; j < batch; ++j) {
    for (int i = 0; i < dims.k_z; ++i) n.eps(i, j) = normal(rng);
    for (int i = 0; i < dims.k_c; ++i) n.gumbel(i, j) = sample_gumbel(rng);
  }
  return n;
}

Batch make_batch(const std::vector<LabeledSample>& samples, std::span<const std::size_t> indices) {
  require(!indices.empty(), "empty batch");
  const auto& first = samples.at(indices[0]);
  Batch b;
  b.trajectories.resize(first.trajectory.points().size(), indices.size());
  b.goals.resize(first.goal.size(), indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& s = samples.at(indices[j]);
    b.trajectories.col(j) = s.trajectory.flatten();
    b.goals.col(j) = s.goal;
  }
  return b;
}

Batch make_batch(const std::vector<LabeledSample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(samples, idx);
}

LossResult atp_loss(const AtpModel& model, const Batch& batch, const LossSettings& s, const LossNoise& noise,
                    bool with_gradients) {
  const auto& d = model.dims();
  const Eigen::Index B = batch.trajectories.cols();
  require_dims(batch.trajectories.rows() == d.trajectory_size() && batch.goals.rows() == d.workspace_dim &&
                   batch.goals.cols() == B,
               "atp_loss: batch shape does not match model");
  require_dims(noise.eps.rows() == d.k_z && noise.eps.cols() == B && noise.gumbel.rows() == d.k_c &&
                   noise.gumbel.cols() == B,
               "atp_loss: noise shape does not match batch");
  require(s.tau > 0.0, "atp_loss: tau must be > 0");
  const double inv_b = 1.0 / static_cast<double>(B);

  // Encoder.
  ForwardCache enc_cache;
  const MatrixXd enc_out = forward(model.encoder(), batch.trajectories, with_gradients ? &enc_cache : nullptr);
  const MatrixXd mu = enc_out.topRows(d.k_z);
  const MatrixXd log_sigma = enc_out.middleRows(d.k_z, d.k_z);
  const MatrixXd logits = enc_out.middleRows(2 * d.k_z, d.k_c);
  const MatrixXd goal_hat = enc_out.bottomRows(d.workspace_dim);
  const MatrixXd sigma = log_sigma.array().exp();

  // Reparametrized samples.
  const MatrixXd z = mu + sigma.cwiseProduct(noise.eps);
  MatrixXd c;
  softmax_columns((logits + noise.gumbel) / s.tau, c, nullptr);
  MatrixXd probs, log_probs;
  softmax_columns(logits, probs, &log_probs);

  // Decoder, fed the labelled goal.
  MatrixXd dec_in(d.decoder_input_size(), B);
  dec_in << z, c, batch.goals;
  ForwardCache dec_cache;
  const MatrixXd tanh_out = forward(model.decoder(), dec_in, with_gradients ? &dec_cache : nullptr);
  const MatrixXd recon_err = kPi * tanh_out - batch.trajectories;
  const double n_traj = static_cast<double>(recon_err.size());

  LossResult r;
  auto& t = r.terms;
  t.recon_mse = recon_err.squaredNorm() / n_traj;
  t.recon_term = s.recon_weight * t.recon_mse;

  const MatrixXd kl_units = 0.5 * (mu.array().square() + sigma.array().square() - 1.0 - 2.0 * log_sigma.array());
  t.kl_z_per_unit = kl_units.rowwise().sum() * inv_b;
  t.kl_z = t.kl_z_per_unit.sum();
  const VectorXd neg_entropy = (probs.array() * log_probs.array()).colwise().sum().transpose();
  t.kl_c = std::log(static_cast<double>(d.k_c)) + neg_entropy.mean();
  t.capacity_z_term = s.gamma * std::abs(t.kl_z - s.capacity_z);
  t.capacity_c_term = s.gamma * std::abs(t.kl_c - s.capacity_c);

  const MatrixXd goal_err = goal_hat - batch.goals;
  const double n_goal = static_cast<double>(goal_err.size());
  t.goal_mse = goal_err.squaredNorm() / n_goal;
  t.goal_term = s.goal_weight * t.goal_mse;
  t.loss = t.recon_term + t.capacity_z_term + t.capacity_c_term + t.goal_term;
  if (!with_gradients) return r;

  // Decoder backward: d/d(tanh output) of recon_weight * MSE.
  const MatrixXd d_tanh = (2.0 * s.recon_weight * kPi / n_traj) * recon_err;
  r.decoder_grad = backward(model.decoder(), dec_cache, d_tanh);
  const MatrixXd& d_dec_in = r.decoder_grad.input;
  const MatrixXd dz = d_dec_in.topRows(d.k_z);
  const MatrixXd dc = d_dec_in.middleRows(d.k_z, d.k_c);

  MatrixXd d_enc_out = MatrixXd::Zero(enc_out.rows(), B);
  auto d_mu = d_enc_out.topRows(d.k_z);
  auto d_log_sigma = d_enc_out.middleRows(d.k_z, d.k_z);
  auto d_logits = d_enc_out.middleRows(2 * d.k_z, d.k_c);
  auto d_goal = d_enc_out.bottomRows(d.workspace_dim);

  // z = mu + exp(log_sigma) * eps
  d_mu = dz;
  d_log_sigma = dz.cwiseProduct(sigma).cwiseProduct(noise.eps);

  // c = softmax((logits + g) / tau)
  for (Eigen::Index j = 0; j < B; ++j) {
    const double dot = c.col(j).dot(dc.col(j));
    d_logits.col(j) = c.col(j).cwiseProduct((dc.col(j).array() - dot).matrix()) / s.tau;
  }

  // gamma |KL_z - C_z|
  const double gz = s.gamma * sign(t.kl_z - s.capacity_z) * inv_b;
  d_mu += gz * mu;
  d_log_sigma += gz * (sigma.array().square() - 1.0).matrix();

  // gamma |KL_c - C_c|, KL_c = ln k + mean sum p ln p with p = softmax(logits)
  const double gc = s.gamma * sign(t.kl_c - s.capacity_c) * inv_b;
  for (Eigen::Index j = 0; j < B; ++j) {
    d_logits.col(j) += gc * probs.col(j).cwiseProduct((log_probs.col(j).array() - neg_entropy[j]).matrix());
  }

  d_goal = (2.0 * s.goal_weight / n_goal) * goal_err;

  r.encoder_grad = backward(model.encoder(), enc_cache, d_enc_out);
  return r;
}

GradcheckReport gradcheck_atp_loss(AtpModel& model, const Batch& batch, const LossSettings& settings,
                                   const LossNoise& noise, const GradcheckOptions& opts) {
  const LossResult r = atp_loss(model, batch, settings, noise);
  std::vector<double*> slots = parameter_slots(model.encoder());
  std::vector<double> analytic = flatten_gradients(r.encoder_grad);
  const std::vector<double*> dec_slots = parameter_slots(model.decoder());
  const std::vector<double> dec_grad = flatten_gradients(r.decoder_grad);
  slots.insert(slots.end(), dec_slots.begin(), dec_slots.end());
  analytic.insert(analytic.end(), dec_grad.begin(), dec_grad.end());
  return gradcheck(slots, analytic, [&] { return atp_loss(model, batch, settings, noise, false).terms.loss; }, opts);
}

LossSettings loss_settings(const TrainingConfig& cfg, const ModelDims& dims, long step, long total_steps) {
  LossSettings s;
  s.gamma = cfg.gamma;
  s.tau = cfg.tau;
  s.goal_weight = cfg.goal_weight;
  s.recon_weight = cfg.recon_weight ? *cfg.recon_weight : static_cast<double>(dims.trajectory_size());
  const double cc_max = cfg.cc_max ? *cfg.cc_max : std::log(static_cast<double>(dims.k_c));
  s.capacity_z = CapacitySchedule{cfg.cz_max, cfg.capacity_ramp}.at(step, total_steps);
  s.capacity_c = CapacitySchedule{cc_max, cfg.capacity_ramp}.at(step, total_steps);
  return s;
}

void check_dataset(const AtpModel& model, const std::vector<LabeledSample>& dataset) {
  require(!dataset.empty(), "training dataset is empty");
  const auto& d = model.dims();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.trajectory.dof() != d.dof || s.trajectory.steps() != d.steps || s.goal.size() != d.workspace_dim) {
      throw DimensionError("sample " + std::to_string(i) + " does not match model dimensions");
    }
  }
}

double learning_rate(const TrainingConfig& cfg, long step, long total_steps) {
  const double start = cfg.lr_decay_from * static_cast<double>(total_steps);
  const double span = static_cast<double>(total_steps) - start;
  if (static_cast<double>(step) <= start || span <= 0.0) return cfg.adam.lr;
  const double frac = std::min(1.0, (static_cast<double>(step) - start) / span);
  return cfg.adam.lr * (1.0 - frac * (1.0 - cfg.lr_final));
}

std::vector<EpochMetrics> train(AtpModel& model, const std::vector<LabeledSample>& dataset,
                                const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset(model, dataset);
  const auto& dims = model.dims();
  const Batch all = make_batch(dataset);
  const std::size_t n = dataset.size();
  const std::size_t batch_size = std::min<std::size_t>(cfg.batch_size, n);
  const long batches_per_epoch = static_cast<long>((n + batch_size - 1) / batch_size);
  const long total_steps = batches_per_epoch * cfg.epochs;

  Rng rng(cfg.seed);
  AdamState enc_state(model.encoder(), cfg.adam);
  AdamState dec_state(model.decoder(), cfg.adam);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochMetrics> log;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const AtpModel last_good = model;
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.kl_z_per_unit = VectorXd::Zero(dims.k_z);
    double weight_sum = 0.0;
    for (long b = 0; b < batches_per_epoch; ++b, ++step) {
      const std::size_t begin = b * batch_size;
      const std::size_t end = std::min(n, begin + batch_size);
      const Eigen::Index count = static_cast<Eigen::Index>(end - begin);
      Batch batch;
      batch.trajectories.resize(all.trajectories.rows(), count);
      batch.goals.resize(all.goals.rows(), count);
      for (Eigen::Index j = 0; j < count; ++j) {
        batch.trajectories.col(j) = all.trajectories.col(order[begin + j]);
        batch.goals.col(j) = all.goals.col(order[begin + j]);
      }
      const LossSettings settings = loss_settings(cfg, dims, step, total_steps);
      const LossNoise noise = draw_noise(dims, static_cast<int>(count), rng);
      LossResult r = atp_loss(model, batch, settings, noise);
      if (!std::isfinite(r.terms.loss)) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) + " (non-finite loss)",
                            last_good, r.terms);
      }
      enc_state.options.lr = dec_state.options.lr = learning_rate(cfg, step, total_steps);
      try {
        adam_step(enc_state, model.encoder(), r.encoder_grad);
        adam_step(dec_state, model.decoder(), r.decoder_grad);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(), last_good, r.terms);
      }
      const double w = static_cast<double>(count);
      weight_sum += w;
      m.loss += w * r.terms.loss;
      m.recon_mse += w * r.terms.recon_mse;
      m.goal_mse += w * r.terms.goal_mse;
      m.kl_z += w * r.terms.kl_z;
      m.kl_c += w * r.terms.kl_c;
      m.kl_z_per_unit += w * r.terms.kl_z_per_unit;
      m.capacity_z = settings.capacity_z;
      m.capacity_c = settings.capacity_c;
    }
    m.loss /= weight_sum;
    m.recon_mse /= weight_sum;
    m.goal_mse /= weight_sum;
    m.kl_z /= weight_sum;
    m.kl_c /= weight_sum;
    m.kl_z_per_unit /= weight_sum;
    spdlog::debug("epoch {:4d} loss {:.5f} recon {:.3e} goal {:.3e} kl_z {:.3f} kl_c {:.3f}", m.epoch, m.loss,
                  m.recon_mse, m.goal_mse, m.kl_z, m.kl_c);
    log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  model.config_fingerprint = cfg.fingerprint();
  model.final_unit_kl = log.back().kl_z_per_unit;
  return log;
}

}  // namespace atp
