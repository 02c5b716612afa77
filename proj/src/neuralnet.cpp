#include "atp/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "atp/errors.hpp"
#include "atp/kernels.hpp"

namespace atp {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw IoError("unknown activation '" + name + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    require_dims(l.weight.rows() == l.bias.size(), "layer " + std::to_string(i) + ": bias size mismatch");
    if (i > 0) {
      require_dims(l.weight.cols() == layers_[i - 1].weight.rows(),
                   "layer " + std::to_string(i) + ": input does not match previous output");
    }
    require(l.weight.allFinite() && l.bias.allFinite(), "layer " + std::to_string(i) + ": non-finite parameters");
  }
}

DenseNet DenseNet::glorot(int input_dim, const std::vector<int>& widths, const std::vector<Activation>& activations,
                          std::mt19937_64& rng) {
  require(widths.size() == activations.size(), "one activation per layer required");
  std::vector<DenseLayer> layers;
  int fan_in = input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int fan_out = widths[i];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = u(rng);
    layer.bias = VectorXd::Zero(fan_out);
    layer.activation = activations[i];
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return DenseNet(std::move(layers));
}

int DenseNet::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int DenseNet::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool DenseNet::operator==(const DenseNet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.weight != b.weight || a.bias != b.bias)
      return false;
  }
  return true;
}

namespace {

void activate(Activation act, MatrixXd& m) {
  switch (act) {
    case Activation::relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::tanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

MatrixXd forward(const DenseNet& net, const MatrixXd& batch, ForwardCache* cache) {
  require_dims(batch.rows() == net.input_dim(), "forward: input has " + std::to_string(batch.rows()) +
                                                    " rows, network expects " + std::to_string(net.input_dim()));
  if (!batch.allFinite()) throw NumericError("forward: non-finite input");
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  MatrixXd x = batch;
  for (const auto& layer : net.layers()) {
    MatrixXd y;
    kernels::affine_forward(layer.weight, layer.bias, x, y);
    activate(layer.activation, y);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->outputs.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

VectorXd forward(const DenseNet& net, const VectorXd& x) {
  return forward(net, MatrixXd(x), nullptr).col(0);
}

NetGradients backward(const DenseNet& net, const ForwardCache& cache, const MatrixXd& out_grad) {
  const auto& layers = net.layers();
  require(cache.inputs.size() == layers.size() && cache.outputs.size() == layers.size(),
          "backward: cache does not match network");
  require_dims(out_grad.rows() == net.output_dim() && out_grad.cols() == cache.outputs.back().cols(),
               "backward: output gradient shape mismatch");
  NetGradients grads;
  grads.layers.resize(layers.size());
  MatrixXd delta = out_grad;
  for (std::size_t r = layers.size(); r-- > 0;) {
    const auto& layer = layers[r];
    const MatrixXd& y = cache.outputs[r];
    switch (layer.activation) {
      case Activation::relu:
        delta = (y.array() > 0.0).select(delta, 0.0);
        break;
      case Activation::tanh:
        delta = (delta.array() * (1.0 - y.array().square())).matrix();
        break;
      case Activation::identity:
        break;
    }
    MatrixXd dx;
    kernels::affine_backward(layer.weight, cache.inputs[r], delta, grads.layers[r].weight, grads.layers[r].bias, &dx);
    delta = std::move(dx);
  }
  grads.input = std::move(delta);
  return grads;
}

AdamState::AdamState(const DenseNet& net, AdamOptions opts) : options(opts) {
  for (const auto& l : net.layers()) {
    first.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
    second.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
  }
}

namespace {

template <typename P, typename G>
void adam_update(P& param, const G& grad, G& m, G& v, const AdamOptions& o, double c1, double c2) {
  m = o.beta1 * m + (1.0 - o.beta1) * grad;
  v = o.beta2 * v + (1.0 - o.beta2) * grad.cwiseProduct(grad);
  param.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
}

}  // namespace

void adam_step(AdamState& state, DenseNet& net, const NetGradients& grads) {
  auto& layers = net.layers();
  require(grads.layers.size() == layers.size() && state.first.size() == layers.size(),
          "adam_step: gradient/state do not match network");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    require_dims(grads.layers[i].weight.rows() == layers[i].weight.rows() &&
                     grads.layers[i].weight.cols() == layers[i].weight.cols() &&
                     grads.layers[i].bias.size() == layers[i].bias.size(),
                 "adam_step: gradient shape mismatch in layer " + std::to_string(i));
    if (!grads.layers[i].weight.allFinite() || !grads.layers[i].bias.allFinite()) {
      throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(i));
    }
  }
  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_update(layers[i].weight, grads.layers[i].weight, state.first[i].weight, state.second[i].weight, o, c1, c2);
    adam_update(layers[i].bias, grads.layers[i].bias, state.first[i].bias, state.second[i].bias, o, c1, c2);
  }
}

std::vector<double*> parameter_slots(DenseNet& net) {
  std::vector<double*> slots;
  for (auto& l : net.layers()) {
    for (Eigen::Index k = 0; k < l.weight.size(); ++k) slots.push_back(l.weight.data() + k);
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) slots.push_back(l.bias.data() + k);
  }
  return slots;
}

std::vector<double> flatten_gradients(const NetGradients& grads) {
  std::vector<double> flat;
  for (const auto& l : grads.layers) {
    flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

GradcheckReport gradcheck(std::span<double* const> slots, std::span<const double> analytic,
                          const std::function<double()>& loss, const GradcheckOptions& opts) {
  require_dims(slots.size() == analytic.size(), "gradcheck: slots and analytic gradients differ in size");
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  std::shuffle(order.begin(), order.end(), rng);
  if (opts.max_params > 0 && order.size() > static_cast<std::size_t>(opts.max_params)) order.resize(opts.max_params);

  GradcheckReport report;
  report.tolerance = opts.tolerance;
  for (std::size_t idx : order) {
    double* p = slots[idx];
    const double saved = *p;
    *p = saved + opts.step;
    const double up = loss();
    *p = saved - opts.step;
    const double down = loss();
    *p = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
    double rel = std::abs(a - numeric) / denom;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    ++report.checked;
    if (report.worst_slot < 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_slot = static_cast<int>(idx);
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.checked > 0 && report.max_rel_error < opts.tolerance;
  return report;
}

GradcheckReport gradcheck(DenseNet& net,
                          const std::function<std::pair<double, NetGradients>(const DenseNet&)>& loss_fn,
                          const GradcheckOptions& opts) {
  const std::vector<double> analytic = flatten_gradients(loss_fn(net).second);
  const std::vector<double*> slots = parameter_slots(net);
  return gradcheck(slots, analytic, [&] { return loss_fn(net).first; }, opts);
}

}  // namespace atp
