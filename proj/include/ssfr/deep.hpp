#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssfr/grid.hpp"
#include "ssfr/rng.hpp"
#include "ssfr/types.hpp"

namespace ssfr {

enum class Activation { identity, relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;

  Index in_dim() const { return weights.cols(); }
  Index out_dim() const { return weights.rows(); }
};

enum class Architecture {
  shared_codec,  // trunk on concatenated basis encodings, decoded through the outcome basis
  generic,       // trunk on concatenated raw predictor values with Q linear outputs
};

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture a);

struct DeepConfig {
  Architecture architecture = Architecture::shared_codec;
  std::vector<int> hidden_sizes{32};
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Dense trunk plus, for the shared codec, the outcome basis used as decoder.
class DeepNet {
 public:
  /// input_dim: sum K_j (shared codec) or sum R_j (generic). decoder is
  /// required for the shared codec and ignored otherwise; output_dim is Q.
  DeepNet(DeepConfig config, Index input_dim, Index output_dim,
          std::shared_ptr<const BasisSystem> decoder, std::vector<DenseLayer> layers);

  const DeepConfig& config() const { return config_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  /// Mutable access bumps the version so caches from earlier forwards go stale.
  std::vector<DenseLayer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  const std::shared_ptr<const BasisSystem>& decoder() const { return decoder_; }
  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }
  std::uint64_t version() const { return version_; }
  std::size_t num_params() const;

 private:
  DeepConfig config_;
  Index input_dim_;
  Index output_dim_;
  std::shared_ptr<const BasisSystem> decoder_;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
/// Hidden layers use config.activation, the last layer is linear.
DeepNet init_params(const DeepConfig& config, Index input_dim, Index output_dim,
                    std::shared_ptr<const BasisSystem> decoder, std::uint64_t seed);

struct DeepCache {
  const DeepNet* net = nullptr;
  std::uint64_t version = 0;
  std::vector<RowMatrix> inputs;       // input to each layer (post-dropout)
  std::vector<RowMatrix> pre;          // pre-activation of each layer
  std::vector<RowMatrix> masks;        // dropout mask per hidden layer (empty when inactive)
};

/// n x Q. Dropout is active only when training is set and the rate is positive;
/// the mask stream comes from `rng`, which must then be provided.
RowMatrix deep_forward(const DeepNet& net, const RowMatrix& inputs, bool training, Rng* rng = nullptr,
                       DeepCache* cache = nullptr);

struct DeepGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Reverse accumulation of sum(upstream o output) through the cached forward.
/// Throws ContractViolation when the cache belongs to another net or older parameters.
DeepGradients deep_backward(const DeepNet& net, const DeepCache& cache, const RowMatrix& upstream);

/// Functional MLP layer: h_k(t) = tau(b_k(t) + sum_m int w_{m,k}(s,t) h_m(s) ds)
/// with w_{m,k}(s,t) = psi(t)^T C_{m,k} phi(s) and b_k(t) = psi(t)^T beta_k.
struct FunctionalLayer {
  Grid in_grid;
  Grid out_grid;
  std::shared_ptr<const BasisSystem> s_basis;  // on in_grid
  std::shared_ptr<const BasisSystem> t_basis;  // on out_grid
  std::vector<std::vector<Matrix>> coefficients;  // [m][k], each U x K
  std::vector<Vector> bias;                        // [k], each U
  Activation activation = Activation::identity;

  std::size_t num_inputs() const { return coefficients.size(); }
  std::size_t num_outputs() const { return bias.size(); }
};

/// Zero coefficients for the given neuron counts.
FunctionalLayer make_functional_layer(const Grid& in_grid, const Grid& out_grid, std::size_t inputs,
                                      std::size_t outputs, int num_s_basis, int num_t_basis, int degree,
                                      Activation activation);

/// inputs: M_in x R_in curves on `input_grid`; returns M_out x Q_out curves on the out grid.
RowMatrix functional_layer_forward(const FunctionalLayer& layer, const RowMatrix& inputs, const Grid& input_grid);

}  // namespace ssfr
