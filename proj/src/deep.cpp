#include "ssfr/deep.hpp"

#include <cmath>

#include "ssfr/error.hpp"
#include "ssfr/structured.hpp"

namespace ssfr {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "shared_codec") return Architecture::shared_codec;
  if (name == "generic") return Architecture::generic;
  throw InvalidArgument("unknown deep architecture '" + name + "'");
}

std::string to_string(Architecture a) {
  return a == Architecture::shared_codec ? "shared_codec" : "generic";
}

void DeepConfig::validate() const {
  for (int h : hidden_sizes)
    if (h <= 0) throw InvalidArgument("deep config: hidden sizes must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("deep config: dropout rate must lie in [0, 1)");
}

DeepNet::DeepNet(DeepConfig config, Index input_dim, Index output_dim,
                 std::shared_ptr<const BasisSystem> decoder, std::vector<DenseLayer> layers)
    : config_(std::move(config)), input_dim_(input_dim), output_dim_(output_dim),
      decoder_(std::move(decoder)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.empty()) throw InvalidArgument("deep net: needs at least one layer");
  if (config_.architecture == Architecture::shared_codec) {
    if (!decoder_) throw InvalidArgument("deep net: shared codec needs the outcome basis");
    if (decoder_->eval_matrix().cols() != output_dim_)
      throw InvalidArgument("deep net: decoder grid length differs from output dimension");
  }
  const Index last_out = config_.architecture == Architecture::shared_codec ? decoder_->num_basis() : output_dim_;
  Index prev = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in_dim() != prev || layer.bias.size() != layer.out_dim())
      throw InvalidArgument("deep net: layer " + std::to_string(l) + " shape mismatch");
    if (!layer.weights.allFinite() || !layer.bias.allFinite())
      throw InvalidArgument("deep net: non-finite parameters in layer " + std::to_string(l));
    prev = layer.out_dim();
  }
  if (prev != last_out) throw InvalidArgument("deep net: last layer width mismatch");
}

std::size_t DeepNet::num_params() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return total;
}

DeepNet init_params(const DeepConfig& config, Index input_dim, Index output_dim,
                    std::shared_ptr<const BasisSystem> decoder, std::uint64_t seed) {
  config.validate();
  if (config.architecture == Architecture::shared_codec && !decoder)
    throw InvalidArgument("init_params: shared codec needs the outcome basis");
  std::vector<Index> widths{input_dim};
  for (int h : config.hidden_sizes) widths.push_back(h);
  widths.push_back(config.architecture == Architecture::shared_codec ? decoder->num_basis() : output_dim);
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    for (Index c = 0; c < fan_in; ++c)
      for (Index r = 0; r < fan_out; ++r) layer.weights(r, c) = rng.uniform(-bound, bound);
    layer.bias = Vector::Zero(fan_out);
    layer.activation = (l + 2 == widths.size()) ? Activation::identity : config.activation;
    layers.push_back(std::move(layer));
  }
  return DeepNet(config, input_dim, output_dim, std::move(decoder), std::move(layers));
}

namespace {

void activate(Activation a, RowMatrix& m) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
  }
}

// d act / d pre, evaluated at the pre-activation.
void scale_by_derivative(Activation a, const RowMatrix& pre, RowMatrix& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: grad = (pre.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad.array() *= 1.0 - pre.array().tanh().square(); break;
  }
}

}  // namespace

RowMatrix deep_forward(const DeepNet& net, const RowMatrix& inputs, bool training, Rng* rng, DeepCache* cache) {
  if (inputs.cols() != net.input_dim())
    throw InvalidArgument("deep_forward: expected " + std::to_string(net.input_dim()) + " input columns, got " +
                          std::to_string(inputs.cols()));
  const double rate = net.config().dropout_rate;
  const bool dropout = training && rate > 0.0;
  if (dropout && rng == nullptr) throw InvalidArgument("deep_forward: dropout requires a random stream");
  const auto& layers = net.layers();
  if (cache) {
    cache->net = &net;
    cache->version = net.version();
    cache->inputs.clear();
    cache->pre.clear();
    cache->masks.clear();
  }
  RowMatrix a = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    RowMatrix z = a * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    RowMatrix h = z;
    activate(layer.activation, h);
    RowMatrix mask;
    if (dropout && l + 1 < layers.size()) {
      const double keep = 1.0 - rate;
      mask.resize(h.rows(), h.cols());
      for (Index i = 0; i < h.rows(); ++i)
        for (Index c = 0; c < h.cols(); ++c) mask(i, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
      h.array() *= mask.array();
    }
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(std::move(z));
      cache->masks.push_back(std::move(mask));
    }
    a = std::move(h);
  }
  if (net.config().architecture == Architecture::shared_codec) return a * net.decoder()->eval_matrix();
  return a;
}

DeepGradients deep_backward(const DeepNet& net, const DeepCache& cache, const RowMatrix& upstream) {
  if (cache.net != &net || cache.version != net.version())
    throw ContractViolation("deep_backward: cache does not belong to the current parameters");
  const auto& layers = net.layers();
  if (cache.inputs.size() != layers.size()) throw ContractViolation("deep_backward: incomplete cache");
  const Index n = cache.inputs.front().rows();
  if (upstream.rows() != n || upstream.cols() != net.output_dim())
    throw InvalidArgument("deep_backward: upstream shape mismatch");
  RowMatrix grad = net.config().architecture == Architecture::shared_codec
                       ? RowMatrix(upstream * net.decoder()->eval_matrix().transpose())
                       : upstream;
  DeepGradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (cache.masks[l].size() > 0) grad.array() *= cache.masks[l].array();
    scale_by_derivative(layers[l].activation, cache.pre[l], grad);
    g.weights[l] = grad.transpose() * cache.inputs[l];
    g.biases[l] = grad.colwise().sum().transpose();
    if (l > 0) grad = grad * layers[l].weights;
  }
  return g;
}

FunctionalLayer make_functional_layer(const Grid& in_grid, const Grid& out_grid, std::size_t inputs,
                                      std::size_t outputs, int num_s_basis, int num_t_basis, int degree,
                                      Activation activation) {
  FunctionalLayer layer{in_grid, out_grid, nullptr, nullptr, {}, {}, activation};
  layer.s_basis = std::make_shared<const BasisSystem>(bspline_basis(in_grid, num_s_basis, degree));
  layer.t_basis = std::make_shared<const BasisSystem>(bspline_basis(out_grid, num_t_basis, degree));
  layer.coefficients.assign(inputs, std::vector<Matrix>(outputs, Matrix::Zero(num_t_basis, num_s_basis)));
  layer.bias.assign(outputs, Vector::Zero(num_t_basis));
  return layer;
}

RowMatrix functional_layer_forward(const FunctionalLayer& layer, const RowMatrix& inputs, const Grid& input_grid) {
  if (!(input_grid == layer.in_grid)) throw InvalidArgument("functional layer: input grid differs from layer grid");
  if (inputs.cols() != static_cast<Index>(layer.in_grid.size()) ||
      inputs.rows() != static_cast<Index>(layer.num_inputs()))
    throw InvalidArgument("functional layer: input shape mismatch");
  const RowMatrix encoded = encode_rows(inputs, layer.in_grid, *layer.s_basis);  // M_in x K
  const Matrix& psi = layer.t_basis->eval_matrix();
  RowMatrix out(static_cast<Index>(layer.num_outputs()), psi.cols());
  for (std::size_t k = 0; k < layer.num_outputs(); ++k) {
    Vector latent = layer.bias[k];
    for (std::size_t m = 0; m < layer.num_inputs(); ++m)
      latent += layer.coefficients[m][k] * encoded.row(static_cast<Index>(m)).transpose();
    out.row(static_cast<Index>(k)) = latent.transpose() * psi;
  }
  activate(layer.activation, out);
  return out;
}

}  // namespace ssfr
