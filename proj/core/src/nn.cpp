// SPDX-License-Identifier: Apache-2.0
#include "ef/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ef {
namespace {

Matrix affine(const DenseLayer& layer, const Matrix& inputs) {
  Matrix out = linalg::mul_abt(inputs, layer.weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  return out;
}

Matrix relu(const Matrix& pre) {
  Matrix out = pre;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

// Zeroes grad wherever the pre-activation was not positive (subgradient 0 at 0).
void relu_mask(Matrix& grad, const Matrix& pre) {
  auto g = grad.values();
  const auto p = pre.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(p[i] > 0.0)) g[i] = 0.0;
  }
}

DenseLayer layer_grad(const Matrix& grad_out, const Matrix& layer_input) {
  DenseLayer g;
  g.weight = linalg::mul_atb(grad_out, layer_input);
  g.bias.assign(grad_out.cols(), 0.0);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const auto row = grad_out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
  }
  return g;
}

void check_input(std::size_t expected, const Matrix& inputs, const char* what) {
  if (inputs.cols() != expected) {
    throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(inputs.cols()) +
                                " columns, network expects " + std::to_string(expected));
  }
}

// Runs `layers` with ReLU after every layer whose index is below relu_count.
Matrix run_chain(std::span<const DenseLayer> layers, Matrix x, std::size_t relu_count,
                 ForwardCache* cache) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix pre = affine(layers[k], x);
    Matrix next = k < relu_count ? relu(pre) : pre;
    if (cache != nullptr) {
      cache->layer_inputs.push_back(std::move(x));
      cache->pre_activations.push_back(std::move(pre));
    }
    x = std::move(next);
  }
  return x;
}

// Backpropagates grad (w.r.t. the chain output) through layers whose
// activations are all ReLU except possibly the last.
std::vector<DenseLayer> back_chain(std::span<const DenseLayer> layers, const ForwardCache& cache,
                                   Matrix grad, bool last_is_relu) {
  std::vector<DenseLayer> grads(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (k + 1 < layers.size() || last_is_relu) relu_mask(grad, cache.pre_activations[k]);
    grads[k] = layer_grad(grad, cache.layer_inputs[k]);
    if (k > 0) grad = linalg::mul_ab(grad, layers[k].weight);
  }
  return grads;
}

void append_tensors(std::vector<std::span<double>>& out, std::vector<DenseLayer>& layers) {
  for (auto& layer : layers) {
    out.push_back(layer.weight.values());
    out.emplace_back(layer.bias);
  }
}

void append_tensors(std::vector<std::span<const double>>& out, const std::vector<DenseLayer>& layers) {
  for (const auto& layer : layers) {
    out.push_back(layer.weight.values());
    out.emplace_back(layer.bias);
  }
}

void require_same_layout(std::span<const std::span<const double>> a,
                         std::span<const std::span<const double>> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": tensor count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw std::invalid_argument(std::string(what) + ": tensor shape mismatch");
  }
}

template <typename Tensors>
std::vector<std::span<const double>> const_view(const Tensors& tensors) {
  return {tensors.begin(), tensors.end()};
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  append_tensors(out, layers);
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  append_tensors(out, layers);
  return out;
}

void validate_chain(std::span<const DenseLayer> layers) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
      throw std::invalid_argument("layer " + std::to_string(k) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw std::invalid_argument("layer " + std::to_string(k) + " bias length does not match rows");
    }
    if (k > 0 && layer.weight.cols() != layers[k - 1].weight.rows()) {
      throw std::invalid_argument("layer " + std::to_string(k) + " input size does not chain");
    }
  }
}

DenseLayer init_dense(std::size_t in, std::size_t out, Xoshiro256& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  return layer;
}

MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Xoshiro256 rng(seed);
  MlpParams params;
  for (std::size_t k = 0; k + 1 < spec.layer_sizes.size(); ++k) {
    params.layers.push_back(init_dense(spec.layer_sizes[k], spec.layer_sizes[k + 1], rng));
  }
  return params;
}

ForwardResult forward(const MlpParams& params, const Matrix& inputs) {
  check_input(params.input_size(), inputs, "forward");
  ForwardResult result;
  result.logits = run_chain(params.layers, inputs, params.layers.size() - 1, &result.cache);
  return result;
}

Matrix predict_logits(const MlpParams& params, const Matrix& inputs) {
  check_input(params.input_size(), inputs, "predict_logits");
  return run_chain(params.layers, inputs, params.layers.size() - 1, nullptr);
}

MlpParams backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_logits) {
  if (cache.layer_inputs.size() != params.layers.size()) {
    throw std::invalid_argument("backward: cache does not match the network");
  }
  if (grad_logits.rows() != cache.layer_inputs.front().rows() ||
      grad_logits.cols() != params.output_size()) {
    throw std::invalid_argument("backward: gradient shape does not match the logits");
  }
  return MlpParams{back_chain(params.layers, cache, grad_logits, false)};
}

Matrix softmax_t(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("softmax_t: temperature must be positive and finite");
  }
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto in = logits.row(r);
    auto row = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) row[c] = in[c] / temperature;
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

Matrix softmax(const Matrix& logits) { return softmax_t(logits, 1.0); }

double cross_entropy(const Matrix& probs, const Matrix& labels_onehot) {
  require_same_shape(probs, labels_onehot, "cross_entropy");
  if (probs.rows() == 0) throw std::invalid_argument("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto p = probs.row(r);
    const auto y = labels_onehot.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (y[c] != 0.0) total -= y[c] * std::log(std::max(p[c], kLogFloor));
    }
  }
  return total / static_cast<double>(probs.rows());
}

double kl_divergence(const Matrix& p, const Matrix& q) {
  require_same_shape(p, q, "kl_divergence");
  if (p.rows() == 0) throw std::invalid_argument("kl_divergence: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto pr = p.row(r);
    const auto qr = q.row(r);
    for (std::size_t c = 0; c < pr.size(); ++c) {
      if (pr[c] > 0.0) total += pr[c] * std::log(pr[c] / std::max(qr[c], kLogFloor));
    }
  }
  return total / static_cast<double>(p.rows());
}

std::vector<std::span<double>> MultiHeadNet::tensors() {
  std::vector<std::span<double>> out;
  append_tensors(out, trunk);
  append_tensors(out, heads);
  return out;
}

std::vector<std::span<const double>> MultiHeadNet::tensors() const {
  std::vector<std::span<const double>> out;
  append_tensors(out, trunk);
  append_tensors(out, heads);
  return out;
}

MultiHeadNet as_multi_head(const MlpParams& params) {
  if (params.layers.empty()) throw std::invalid_argument("as_multi_head: no layers");
  MultiHeadNet net;
  net.trunk.assign(params.layers.begin(), params.layers.end() - 1);
  net.heads.push_back(params.layers.back());
  return net;
}

MlpParams to_mlp(const MultiHeadNet& net) {
  if (net.heads.size() != 1) throw std::invalid_argument("to_mlp: network must have exactly one head");
  MlpParams params{net.trunk};
  params.layers.push_back(net.heads.front());
  return params;
}

namespace {

std::size_t net_input_size(const MultiHeadNet& net) {
  if (net.heads.empty()) throw std::invalid_argument("MultiHeadNet: no heads");
  return net.trunk.empty() ? net.heads.front().in_size() : net.trunk.front().in_size();
}

}  // namespace

MultiHeadForward forward(const MultiHeadNet& net, const Matrix& inputs) {
  check_input(net_input_size(net), inputs, "forward");
  MultiHeadForward result;
  result.features = run_chain(net.trunk, inputs, net.trunk.size(), &result.trunk_cache);
  result.head_logits.reserve(net.heads.size());
  for (const auto& head : net.heads) result.head_logits.push_back(affine(head, result.features));
  return result;
}

std::vector<Matrix> predict_head_logits(const MultiHeadNet& net, const Matrix& inputs) {
  check_input(net_input_size(net), inputs, "predict_head_logits");
  const Matrix features = run_chain(net.trunk, inputs, net.trunk.size(), nullptr);
  std::vector<Matrix> out;
  out.reserve(net.heads.size());
  for (const auto& head : net.heads) out.push_back(affine(head, features));
  return out;
}

MultiHeadNet backward(const MultiHeadNet& net, const MultiHeadForward& fwd,
                      std::span<const Matrix> head_grads) {
  if (head_grads.size() != net.heads.size()) {
    throw std::invalid_argument("backward: one gradient per head required");
  }
  MultiHeadNet grads;
  grads.heads.reserve(net.heads.size());
  Matrix feature_grad(fwd.features.rows(), fwd.features.cols());
  for (std::size_t h = 0; h < net.heads.size(); ++h) {
    require_same_shape(head_grads[h], fwd.head_logits[h], "backward");
    grads.heads.push_back(layer_grad(head_grads[h], fwd.features));
    if (!net.trunk.empty()) {
      const Matrix g = linalg::mul_ab(head_grads[h], net.heads[h].weight);
      auto dst = feature_grad.values();
      const auto src = g.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  if (!net.trunk.empty()) grads.trunk = back_chain(net.trunk, fwd.trunk_cache, std::move(feature_grad), true);
  return grads;
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("Adam: learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam: epsilon must be positive");
}

AdamState AdamState::for_tensors(const AdamConfig& config, std::span<const std::span<const double>> shapes) {
  config.validate();
  AdamState state;
  state.config = config;
  for (const auto& t : shapes) {
    state.first_moment.emplace_back(t.size(), 0.0);
    state.second_moment.emplace_back(t.size(), 0.0);
  }
  return state;
}

AdamState AdamState::for_params(const AdamConfig& config, const MlpParams& params) {
  return for_tensors(config, params.tensors());
}

AdamState AdamState::for_params(const AdamConfig& config, const MultiHeadNet& net) {
  return for_tensors(config, net.tensors());
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               double learning_rate) {
  const auto param_view = const_view(params);
  require_same_layout(param_view, grads, "adam_step");
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].size()) {
      throw std::invalid_argument("adam_step: state does not match parameters");
    }
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    const auto g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  adam_step(params.tensors(), grads.tensors(), state, state.config.learning_rate);
}

void adam_step(MultiHeadNet& net, const MultiHeadNet& grads, AdamState& state, double learning_rate) {
  adam_step(net.tensors(), grads.tensors(), state, learning_rate);
}

}  // namespace ef
