#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssfr/dataset.hpp"
#include "ssfr/deep.hpp"
#include "ssfr/structured.hpp"

namespace ssfr {

enum class Link { identity, exp, sigmoid };

Link parse_link(const std::string& name);
std::string to_string(Link link);

/// mu = link(eta), elementwise.
RowMatrix apply_link(Link link, const RowMatrix& eta);
/// d mu / d eta, elementwise.
RowMatrix link_derivative(Link link, const RowMatrix& eta);

/// mu = link(lambda_plus + lambda_minus).
struct SemiStructuredModel {
  StructuredPart structured;
  std::optional<DeepNet> deep;
  Link link = Link::identity;
  std::vector<Grid> predictor_grids;
  Grid outcome_grid;
  /// Applied to predictors before encoding when present.
  std::optional<Standardizer> standardizer;
  /// Interpretable coefficients after post-hoc orthogonalization. Predictions
  /// always use `structured`; surfaces prefer this when present.
  std::optional<StructuredPart> corrected;

  Index num_outputs() const { return static_cast<Index>(outcome_grid.size()); }
};

struct ModelSpec {
  int num_s_basis = 20;
  int num_t_basis = 20;
  int degree = 3;
  Link link = Link::identity;
  std::optional<DeepConfig> deep;
};

/// Zero structured coefficients; deep parameters from init_params with the
/// deep config's seed. Predictors on identical grids share one basis.
SemiStructuredModel build_model(const FunctionalDataset& ds, const ModelSpec& spec);

/// Everything the forward pass needs, computed once per dataset.
struct ModelInputs {
  Index n = 0;
  std::vector<RowMatrix> encoded;  // per term, n x K_j
  RowMatrix deep_inputs;           // n x input_dim, empty without a deep part
  RowMatrix outcome;               // n x Q

  ModelInputs rows(const std::vector<std::size_t>& idx) const;
  ModelInputs rows(std::size_t first, std::size_t count) const;
};

/// Checks grids against the model, standardizes, encodes.
ModelInputs prepare_inputs(const SemiStructuredModel& model, const FunctionalDataset& ds);

struct PredictionParts {
  RowMatrix lambda_plus;
  RowMatrix lambda_minus;
};

PredictionParts predict_parts(const SemiStructuredModel& model, const ModelInputs& inputs);
PredictionParts predict_parts(const SemiStructuredModel& model, const FunctionalDataset& ds);

/// Deterministic evaluation (dropout off).
RowMatrix predict(const SemiStructuredModel& model, const ModelInputs& inputs);
RowMatrix predict(const SemiStructuredModel& model, const FunctionalDataset& ds);
/// training=true samples dropout masks from rng.
RowMatrix predict(const SemiStructuredModel& model, const FunctionalDataset& ds, bool training, Rng* rng);

/// Flat parameter layout: intercept, each Theta_j column-major, then each
/// deep layer's weights (column-major) followed by its bias.
struct ParameterLayout {
  std::size_t structured_size = 0;
  std::size_t deep_size = 0;
  std::size_t total() const { return structured_size + deep_size; }
};

ParameterLayout parameter_layout(const SemiStructuredModel& model);
Vector pack_parameters(const SemiStructuredModel& model);
void unpack_parameters(SemiStructuredModel& model, const Vector& params);
Vector pack_gradients(const StructuredGradients* structured, const DeepGradients* deep, const ParameterLayout& layout);

/// Text magic line, a version line, then a JSON body of named arrays.
void save_model(const SemiStructuredModel& model, const std::filesystem::path& path);
SemiStructuredModel load_model(const std::filesystem::path& path);
std::string serialize_model(const SemiStructuredModel& model);
SemiStructuredModel deserialize_model(const std::string& text);

inline constexpr const char* kCheckpointMagic = "SSFR-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

}  // namespace ssfr
