#include "ssfr/model.hpp"

#include <cmath>

#include "ssfr/error.hpp"

namespace ssfr {

Link parse_link(const std::string& name) {
  if (name == "identity") return Link::identity;
  if (name == "exp") return Link::exp;
  if (name == "sigmoid") return Link::sigmoid;
  throw InvalidArgument("unknown link '" + name + "'");
}

std::string to_string(Link link) {
  switch (link) {
    case Link::identity: return "identity";
    case Link::exp: return "exp";
    case Link::sigmoid: return "sigmoid";
  }
  return "identity";
}

RowMatrix apply_link(Link link, const RowMatrix& eta) {
  switch (link) {
    case Link::identity: return eta;
    case Link::exp: return eta.array().exp().matrix();
    case Link::sigmoid: return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  }
  return eta;
}

RowMatrix link_derivative(Link link, const RowMatrix& eta) {
  switch (link) {
    case Link::identity: return RowMatrix::Ones(eta.rows(), eta.cols());
    case Link::exp: return eta.array().exp().matrix();
    case Link::sigmoid: {
      const auto s = (1.0 / (1.0 + (-eta.array()).exp()));
      return (s * (1.0 - s)).matrix();
    }
  }
  return RowMatrix::Ones(eta.rows(), eta.cols());
}

namespace {

Index deep_input_dim(const StructuredPart& part, const FunctionalDataset& ds, Architecture arch) {
  Index dim = 0;
  if (arch == Architecture::shared_codec) {
    for (const auto& t : part.terms) dim += t.s_basis->num_basis();
  } else {
    for (const auto& g : ds.predictor_grids) dim += static_cast<Index>(g.size());
  }
  return dim;
}

RowMatrix concat_columns(const std::vector<const RowMatrix*>& blocks, Index n) {
  Index cols = 0;
  for (const auto* b : blocks) cols += b->cols();
  RowMatrix out(n, cols);
  Index offset = 0;
  for (const auto* b : blocks) {
    out.middleCols(offset, b->cols()) = *b;
    offset += b->cols();
  }
  return out;
}

RowMatrix gather(const RowMatrix& m, const std::vector<std::size_t>& idx) {
  RowMatrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(idx[i]));
  return out;
}

}  // namespace

SemiStructuredModel build_model(const FunctionalDataset& ds, const ModelSpec& spec) {
  ds.validate();
  BasisCache cache;
  SemiStructuredModel model{make_structured_part(ds, cache, spec.num_s_basis, spec.num_t_basis, spec.degree),
                            std::nullopt,
                            spec.link,
                            ds.predictor_grids,
                            ds.outcome_grid,
                            std::nullopt,
                            std::nullopt};
  if (spec.deep) {
    const Index in_dim = deep_input_dim(model.structured, ds, spec.deep->architecture);
    if (in_dim == 0) throw InvalidArgument("build_model: deep part needs at least one predictor");
    model.deep = init_params(*spec.deep, in_dim, static_cast<Index>(ds.outcome_grid.size()), model.structured.t_basis,
                             spec.deep->seed);
  }
  return model;
}

ModelInputs ModelInputs::rows(const std::vector<std::size_t>& idx) const {
  ModelInputs out;
  out.n = static_cast<Index>(idx.size());
  for (const auto& e : encoded) out.encoded.push_back(gather(e, idx));
  if (deep_inputs.size() > 0) out.deep_inputs = gather(deep_inputs, idx);
  if (outcome.size() > 0) out.outcome = gather(outcome, idx);
  return out;
}

ModelInputs ModelInputs::rows(std::size_t first, std::size_t count) const {
  ModelInputs out;
  out.n = static_cast<Index>(count);
  const auto f = static_cast<Index>(first), c = static_cast<Index>(count);
  for (const auto& e : encoded) out.encoded.push_back(e.middleRows(f, c));
  if (deep_inputs.size() > 0) out.deep_inputs = deep_inputs.middleRows(f, c);
  if (outcome.size() > 0) out.outcome = outcome.middleRows(f, c);
  return out;
}

ModelInputs prepare_inputs(const SemiStructuredModel& model, const FunctionalDataset& raw) {
  raw.validate();
  if (raw.num_predictors() != model.predictor_grids.size())
    throw InvalidArgument("dataset has " + std::to_string(raw.num_predictors()) + " predictors, model expects " +
                          std::to_string(model.predictor_grids.size()));
  for (std::size_t j = 0; j < raw.num_predictors(); ++j)
    if (!(raw.predictor_grids[j] == model.predictor_grids[j]))
      throw InvalidArgument("predictor " + std::to_string(j) + " grid differs from the model grid");
  if (!(raw.outcome_grid == model.outcome_grid)) throw InvalidArgument("outcome grid differs from the model grid");
  const FunctionalDataset ds = model.standardizer ? apply_standardizer(*model.standardizer, raw) : raw;
  ModelInputs in;
  in.n = ds.n();
  in.encoded = encode_terms(model.structured, ds);
  in.outcome = ds.outcome;
  if (model.deep) {
    std::vector<const RowMatrix*> blocks;
    if (model.deep->config().architecture == Architecture::shared_codec) {
      for (const auto& e : in.encoded) blocks.push_back(&e);
    } else {
      for (const auto& p : ds.predictors) blocks.push_back(&p);
    }
    in.deep_inputs = concat_columns(blocks, in.n);
  }
  return in;
}

PredictionParts predict_parts(const SemiStructuredModel& model, const ModelInputs& inputs) {
  PredictionParts parts;
  parts.lambda_plus = structured_forward(model.structured, inputs.encoded, inputs.n);
  if (model.deep)
    parts.lambda_minus = deep_forward(*model.deep, inputs.deep_inputs, false);
  else
    parts.lambda_minus = RowMatrix::Zero(inputs.n, model.num_outputs());
  return parts;
}

PredictionParts predict_parts(const SemiStructuredModel& model, const FunctionalDataset& ds) {
  return predict_parts(model, prepare_inputs(model, ds));
}

RowMatrix predict(const SemiStructuredModel& model, const ModelInputs& inputs) {
  auto parts = predict_parts(model, inputs);
  return apply_link(model.link, parts.lambda_plus + parts.lambda_minus);
}

RowMatrix predict(const SemiStructuredModel& model, const FunctionalDataset& ds) {
  return predict(model, prepare_inputs(model, ds));
}

RowMatrix predict(const SemiStructuredModel& model, const FunctionalDataset& ds, bool training, Rng* rng) {
  if (!training) return predict(model, ds);
  const ModelInputs in = prepare_inputs(model, ds);
  RowMatrix eta = structured_forward(model.structured, in.encoded, in.n);
  if (model.deep) eta += deep_forward(*model.deep, in.deep_inputs, true, rng);
  return apply_link(model.link, eta);
}

ParameterLayout parameter_layout(const SemiStructuredModel& model) {
  ParameterLayout layout;
  layout.structured_size = static_cast<std::size_t>(model.structured.intercept.size());
  for (const auto& t : model.structured.terms) layout.structured_size += static_cast<std::size_t>(t.theta.size());
  if (model.deep) layout.deep_size = model.deep->num_params();
  return layout;
}

Vector pack_parameters(const SemiStructuredModel& model) {
  const auto layout = parameter_layout(model);
  Vector p(static_cast<Index>(layout.total()));
  Index off = 0;
  auto put = [&](const double* data, Index size) {
    std::copy(data, data + size, p.data() + off);
    off += size;
  };
  put(model.structured.intercept.data(), model.structured.intercept.size());
  for (const auto& t : model.structured.terms) put(t.theta.data(), t.theta.size());
  if (model.deep)
    for (const auto& l : model.deep->layers()) {
      put(l.weights.data(), l.weights.size());
      put(l.bias.data(), l.bias.size());
    }
  return p;
}

void unpack_parameters(SemiStructuredModel& model, const Vector& p) {
  const auto layout = parameter_layout(model);
  if (static_cast<std::size_t>(p.size()) != layout.total()) throw InvalidArgument("unpack_parameters: size mismatch");
  Index off = 0;
  auto take = [&](double* data, Index size) {
    std::copy(p.data() + off, p.data() + off + size, data);
    off += size;
  };
  take(model.structured.intercept.data(), model.structured.intercept.size());
  for (auto& t : model.structured.terms) take(t.theta.data(), t.theta.size());
  if (model.deep)
    for (auto& l : model.deep->mutable_layers()) {
      take(l.weights.data(), l.weights.size());
      take(l.bias.data(), l.bias.size());
    }
}

Vector pack_gradients(const StructuredGradients* structured, const DeepGradients* deep, const ParameterLayout& layout) {
  Vector g = Vector::Zero(static_cast<Index>(layout.total()));
  Index off = 0;
  auto put = [&](const double* data, Index size) {
    std::copy(data, data + size, g.data() + off);
    off += size;
  };
  if (structured) {
    put(structured->intercept.data(), structured->intercept.size());
    for (const auto& t : structured->terms) put(t.data(), t.size());
  }
  off = static_cast<Index>(layout.structured_size);
  if (deep)
    for (std::size_t l = 0; l < deep->weights.size(); ++l) {
      put(deep->weights[l].data(), deep->weights[l].size());
      put(deep->biases[l].data(), deep->biases[l].size());
    }
  return g;
}

}  // namespace ssfr
