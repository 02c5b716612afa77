#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace atp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;
  Activation activation = Activation::identity;
};

/// Fully connected network. Batches are stored column-wise.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases. `widths` lists every layer's output
  /// size; `activations` has one entry per layer.
  static DenseNet glorot(int input_dim, const std::vector<int>& widths, const std::vector<Activation>& activations,
                         std::mt19937_64& rng);

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  bool operator==(const DenseNet& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-layer inputs and post-activation outputs saved by forward().
struct ForwardCache {
  std::vector<MatrixXd> inputs;
  std::vector<MatrixXd> outputs;
};

MatrixXd forward(const DenseNet& net, const MatrixXd& batch, ForwardCache* cache = nullptr);
VectorXd forward(const DenseNet& net, const VectorXd& x);

struct LayerGrad {
  MatrixXd weight;
  VectorXd bias;
};

struct NetGradients {
  std::vector<LayerGrad> layers;
  MatrixXd input;  // d(loss)/d(batch)
};

/// Reverse pass for the scalar whose gradient with respect to the network
/// output is out_grad.
NetGradients backward(const DenseNet& net, const ForwardCache& cache, const MatrixXd& out_grad);

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<LayerGrad> first, second;
  long step = 0;

  AdamState() = default;
  AdamState(const DenseNet& net, AdamOptions opts);
};

/// Bias-corrected Adam update in place. Throws NumericError on a non-finite
/// gradient, leaving the parameters untouched.
void adam_step(AdamState& state, DenseNet& net, const NetGradients& grads);

/// Flat views over parameters and gradients in a fixed order
/// (layer by layer, weight column-major, then bias).
std::vector<double*> parameter_slots(DenseNet& net);
std::vector<double> flatten_gradients(const NetGradients& grads);

struct GradcheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int checked = 0;
  int worst_slot = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  int max_params = 200;  // random subset size; all parameters when fewer exist
  // Denominator floor in |a - n| / max(|a|, |n|, floor).
  double floor = 1e-7;
  std::uint64_t seed = 0;
};

/// Central-difference check of `analytic` (aligned with `slots`) against
/// loss(). Slots are restored after each probe.
GradcheckReport gradcheck(std::span<double* const> slots, std::span<const double> analytic,
                          const std::function<double()>& loss, const GradcheckOptions& opts);

/// Convenience overload for a single network: loss_fn returns the loss and
/// its gradients for the current parameters.
GradcheckReport gradcheck(DenseNet& net,
                          const std::function<std::pair<double, NetGradients>(const DenseNet&)>& loss_fn,
                          const GradcheckOptions& opts);

}  // namespace atp
