#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "atp/augmentation.hpp"
#include "atp/errors.hpp"
#include "atp/kinematics.hpp"
#include "atp/neuralnet.hpp"
#include "atp/trajectory.hpp"

namespace atp {

struct ModelDims {
  int dof = 3;
  int steps = 49;  // T; trajectories have T+1 rows
  int k_z = 5;
  int k_c = 4;
  int workspace_dim = 2;
  std::vector<int> encoder_hidden{300, 200};
  std::vector<int> decoder_hidden{200, 300};
  Activation hidden_activation = Activation::relu;

  int trajectory_size() const { return (steps + 1) * dof; }
  int encoder_output_size() const { return 2 * k_z + k_c + workspace_dim; }
  int decoder_input_size() const { return k_z + k_c + workspace_dim; }
  bool operator==(const ModelDims&) const = default;
};

/// Continuous code z and categorical code c (probabilities or one-hot).
struct LatentCode {
  VectorXd z;
  VectorXd c;
};

/// Goal-conditioned joint continuous/discrete autoencoder.
///
/// Encoder: flattened trajectory -> [mu_z | log sigma_z | logits_c | goal].
/// Decoder: [z | c | goal] -> pi * tanh(.), one entry per joint and step.
class AtpModel {
 public:
  AtpModel(KinematicChain chain, ModelDims dims, std::uint64_t seed);
  AtpModel(KinematicChain chain, ModelDims dims, DenseNet encoder, DenseNet decoder);

  const KinematicChain& chain() const { return chain_; }
  const ModelDims& dims() const { return dims_; }
  const DenseNet& encoder() const { return encoder_; }
  const DenseNet& decoder() const { return decoder_; }
  DenseNet& encoder() { return encoder_; }
  DenseNet& decoder() { return decoder_; }

  // Provenance carried through save/load.
  std::string config_fingerprint;
  VectorXd final_unit_kl;  // per-unit KL_z of the last training epoch

 private:
  KinematicChain chain_;
  ModelDims dims_;
  DenseNet encoder_, decoder_;
};

/// Batched encoder outputs, one column per trajectory.
struct EncoderBatch {
  MatrixXd mu, log_sigma, logits, goal;
};

struct Encoding {
  VectorXd mu, sigma, logits, goal;
};

EncoderBatch encode_batch(const AtpModel& model, const MatrixXd& flat_trajectories);
Encoding encode(const AtpModel& model, const Trajectory& xi);

VectorXd reparameterize_gaussian(const VectorXd& mu, const VectorXd& sigma, Rng& rng);
VectorXd reparameterize_gaussian(const VectorXd& mu, const VectorXd& sigma, const VectorXd& eps);

/// Relaxed categorical sample softmax((logits + g) / tau), g ~ Gumbel(0, 1).
/// With hard = true the argmax one-hot is returned instead (its gradient is the
/// soft sample's, see atp_loss).
VectorXd reparameterize_gumbel(const VectorXd& logits, double tau, Rng& rng, bool hard);
VectorXd reparameterize_gumbel(const VectorXd& logits, double tau, const VectorXd& gumbel, bool hard);

VectorXd softmax(const VectorXd& logits);
VectorXd one_hot(int index, int size);
int argmax(const VectorXd& v);

MatrixXd decode_batch(const AtpModel& model, const MatrixXd& z, const MatrixXd& c, const MatrixXd& goals);
Trajectory decode(const AtpModel& model, const VectorXd& z, const VectorXd& c, const VectorXd& goal);

struct KlGaussian {
  double total = 0.0;
  VectorXd per_unit;
};

/// KL(N(mu, diag sigma^2) || N(0, I)).
KlGaussian kl_gaussian(const VectorXd& mu, const VectorXd& sigma);

/// KL(probs || uniform) = ln k + sum p ln p, with 0 ln 0 = 0.
double kl_categorical(const VectorXd& probs);

/// Linear ramp from 0 to `max` over the first `ramp_fraction` of training.
struct CapacitySchedule {
  double max = 0.0;
  double ramp_fraction = 0.6;
  double at(long step, long total_steps) const;
};

struct TrainingConfig {
  int epochs = 250;
  int batch_size = 100;
  double gamma = 30.0;
  double cz_max = 5.0;
  std::optional<double> cc_max;  // defaults to ln k_c
  double capacity_ramp = 0.6;
  // The learning rate falls linearly from adam.lr to lr_final * adam.lr over
  // the steps after lr_decay_from (fraction of training).
  double lr_decay_from = 0.7;
  double lr_final = 0.1;
  double tau = 0.67;
  std::optional<double> recon_weight;  // defaults to (T+1) * dof
  double goal_weight = 100.0;
  std::uint64_t seed = 7;
  AdamOptions adam;

  void validate() const;
  /// Stable hex digest of every field, stored in saved models.
  std::string fingerprint() const;
};

/// Weights and capacities for one evaluation of the objective.
struct LossSettings {
  double gamma = 30.0;
  double capacity_z = 0.0;
  double capacity_c = 0.0;
  double tau = 0.67;
  double recon_weight = 150.0;
  double goal_weight = 100.0;
};

/// Reparametrization noise for a batch: eps (k_z x B) and Gumbel draws (k_c x B).
struct LossNoise {
  MatrixXd eps;
  MatrixXd gumbel;
};

LossNoise draw_noise(const ModelDims& dims, int batch, Rng& rng);
double sample_gumbel(Rng& rng);

struct LossBreakdown {
  double loss = 0.0;
  double recon_mse = 0.0;
  double recon_term = 0.0;
  double kl_z = 0.0;
  double kl_c = 0.0;
  double capacity_z_term = 0.0;
  double capacity_c_term = 0.0;
  double goal_mse = 0.0;
  double goal_term = 0.0;
  VectorXd kl_z_per_unit;
};

struct LossResult {
  LossBreakdown terms;
  NetGradients encoder_grad, decoder_grad;
};

struct Batch {
  MatrixXd trajectories;  // (T+1)*dof x B, row-major flattening per column
  MatrixXd goals;         // workspace_dim x B
};

Batch make_batch(const std::vector<LabeledSample>& samples, std::span<const std::size_t> indices);
Batch make_batch(const std::vector<LabeledSample>& samples);

/// Capacity-controlled objective (minimized):
///   recon_weight * MSE(xi_hat, xi) + gamma |KL_z - C_z| + gamma |KL_c - C_c|
///   + goal_weight * MSE(goal_hat, goal),
/// with KLs averaged over the batch. The decoder is fed the labelled goal.
LossResult atp_loss(const AtpModel& model, const Batch& batch, const LossSettings& settings, const LossNoise& noise,
                    bool with_gradients = true);

/// Finite-difference check of atp_loss over encoder and decoder parameters
/// jointly, with the noise held fixed.
GradcheckReport gradcheck_atp_loss(AtpModel& model, const Batch& batch, const LossSettings& settings,
                                   const LossNoise& noise, const GradcheckOptions& opts);

LossSettings loss_settings(const TrainingConfig& cfg, const ModelDims& dims, long step, long total_steps);
double learning_rate(const TrainingConfig& cfg, long step, long total_steps);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double recon_mse = 0.0;
  double goal_mse = 0.0;
  double kl_z = 0.0;
  double kl_c = 0.0;
  double capacity_z = 0.0;
  double capacity_c = 0.0;
  VectorXd kl_z_per_unit;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, AtpModel last_good, LossBreakdown terms)
      : Error(what), last_good_(std::move(last_good)), terms_(std::move(terms)) {}
  const AtpModel& last_good() const { return last_good_; }
  const LossBreakdown& terms() const { return terms_; }

 private:
  AtpModel last_good_;
  LossBreakdown terms_;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Minibatch Adam on atp_loss. Shuffling and noise come from cfg.seed only.
std::vector<EpochMetrics> train(AtpModel& model, const std::vector<LabeledSample>& dataset,
                                const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

/// Checks every sample's shape against the model.
void check_dataset(const AtpModel& model, const std::vector<LabeledSample>& dataset);

}  // namespace atp
