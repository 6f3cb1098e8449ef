#include "ssfr/training.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>

#include "ssfr/error.hpp"
#include "ssfr/kernels.hpp"

namespace ssfr {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
  if (max_epochs < 0) throw InvalidArgument("train config: max_epochs must be >= 0");
  if (patience < 1) throw InvalidArgument("train config: patience must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train config: learning_rate must be > 0");
  if (smoothing.lambda_s < 0.0 || smoothing.lambda_t < 0.0)
    throw InvalidArgument("train config: smoothing parameters must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw InvalidArgument("train config: validation_fraction must lie in [0, 1)");
}

double functional_risk(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi) {
  if (y.rows() != mu.rows() || y.cols() != mu.cols() || static_cast<Index>(xi.size()) != y.cols())
    throw InvalidArgument("functional_risk: shape mismatch");
  if (y.rows() == 0) throw InvalidArgument("functional_risk: no rows");
  const Vector per_row = kernels::weighted_row_sq_error(y, mu, xi);
  double total = 0.0;
  for (Index i = 0; i < per_row.size(); ++i) total += per_row(i);
  return total / static_cast<double>(y.rows());
}

double evaluate_risk(const SemiStructuredModel& model, const ModelInputs& inputs, std::span<const double> xi,
                     std::size_t chunk) {
  const auto n = static_cast<std::size_t>(inputs.n);
  if (n == 0) throw InvalidArgument("evaluate_risk: no rows");
  double total = 0.0;
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t count = std::min(chunk, n - first);
    const ModelInputs part = inputs.rows(first, count);
    const RowMatrix mu = predict(model, part);
    const Vector per_row = kernels::weighted_row_sq_error(part.outcome, mu, xi);
    for (Index i = 0; i < per_row.size(); ++i) total += per_row(i);
  }
  return total / static_cast<double>(n);
}

namespace {

// Risk over a row subset, gathered in batch-sized chunks so memory stays
// independent of the number of rows.
double subset_risk(const SemiStructuredModel& model, const ModelInputs& inputs, const std::vector<std::size_t>& rows,
                   std::span<const double> xi, std::size_t chunk) {
  double total = 0.0;
  for (std::size_t first = 0; first < rows.size(); first += chunk) {
    const std::size_t count = std::min(chunk, rows.size() - first);
    const std::vector<std::size_t> idx(rows.begin() + static_cast<std::ptrdiff_t>(first),
                                       rows.begin() + static_cast<std::ptrdiff_t>(first + count));
    const ModelInputs part = inputs.rows(idx);
    const RowMatrix mu = predict(model, part);
    const Vector per_row = kernels::weighted_row_sq_error(part.outcome, mu, xi);
    for (Index i = 0; i < per_row.size(); ++i) total += per_row(i);
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

double objective_and_gradient(const SemiStructuredModel& model, const ModelInputs& batch, std::span<const double> xi,
                              const SmoothingParams& smoothing, Rng* dropout_rng, Vector* gradient) {
  const Index n = batch.n;
  if (n == 0) throw InvalidArgument("objective: empty batch");
  RowMatrix eta = structured_forward(model.structured, batch.encoded, n);
  DeepCache cache;
  if (model.deep) eta += deep_forward(*model.deep, batch.deep_inputs, dropout_rng != nullptr, dropout_rng, &cache);
  const RowMatrix mu = apply_link(model.link, eta);
  const double value = functional_risk(batch.outcome, mu, xi) + structured_penalty(model.structured, smoothing);
  if (gradient) {
    // d/d eta of (1/n) sum xi_q (y - mu)^2
    RowMatrix upstream = mu - batch.outcome;
    for (Index q = 0; q < upstream.cols(); ++q) upstream.col(q) *= 2.0 * xi[static_cast<std::size_t>(q)] / static_cast<double>(n);
    if (model.link != Link::identity) upstream.array() *= link_derivative(model.link, eta).array();
    const StructuredGradients sg =
        structured_gradients(model.structured, batch.encoded, model.structured.t_basis->eval_matrix(), upstream, smoothing);
    const auto layout = parameter_layout(model);
    if (model.deep) {
      const DeepGradients dg = deep_backward(*model.deep, cache, upstream);
      *gradient = pack_gradients(&sg, &dg, layout);
    } else {
      *gradient = pack_gradients(&sg, nullptr, layout);
    }
  }
  return value;
}

std::string epoch_json_line(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"train_risk", r.train_risk}, {"val_risk", r.val_risk},
                   {"lr", r.learning_rate}, {"seconds", r.seconds}};
  return j.dump() + "\n";
}

TrainReport train(SemiStructuredModel& model, const FunctionalDataset& ds, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  return train(model, prepare_inputs(model, ds), config, on_epoch);
}

TrainReport train(SemiStructuredModel& model, const ModelInputs& inputs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto n = static_cast<std::size_t>(inputs.n);
  if (n < 2) throw InvalidArgument("train: need at least 2 observations");
  const auto xi = model.outcome_grid.quad_weights();

  std::vector<std::size_t> fit_rows, val_rows;
  if (config.validation_fraction > 0.0) {
    auto s = split_indices(n, config.validation_fraction, Rng::derive_seed(config.seed, 1));
    fit_rows = std::move(s.train);
    val_rows = std::move(s.test);
  } else {
    fit_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit_rows[i] = i;
  }
  // Batches and risks gather rows on demand; the subsets are never copied whole.

  const auto batch = static_cast<std::size_t>(config.batch_size);
  TrainReport report;
  report.initial_train_risk = subset_risk(model, inputs, fit_rows, xi, batch);
  report.initial_val_risk = val_rows.empty() ? report.initial_train_risk : subset_risk(model, inputs, val_rows, xi, batch);
  report.best_validation_risk = report.initial_val_risk;
  if (config.max_epochs == 0) {
    report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    return report;
  }

  const auto layout = parameter_layout(model);
  Vector params = pack_parameters(model);
  Vector best = params;
  Vector trainable = Vector::Zero(params.size());
  if (config.train_structured) trainable.head(static_cast<Index>(layout.structured_size)).setOnes();
  if (config.train_deep && layout.deep_size > 0) trainable.tail(static_cast<Index>(layout.deep_size)).setOnes();
  Vector m1 = Vector::Zero(params.size()), m2 = Vector::Zero(params.size());

  Rng shuffle_rng(Rng::derive_seed(config.seed, 2));
  Rng dropout_rng(Rng::derive_seed(config.seed, 3));
  const bool use_dropout = model.deep && model.deep->config().dropout_rate > 0.0 && config.train_deep;
  std::uint64_t step = 0;
  int wait = 0;
  int last_finite = 0;
  Vector grad;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = clock::now();
    const auto order = permutation(fit_rows.size(), shuffle_rng);
    for (std::size_t first = 0; first < order.size(); first += batch) {
      const std::size_t count = std::min(batch, order.size() - first);
      std::vector<std::size_t> idx(count);
      for (std::size_t b = 0; b < count; ++b) idx[b] = fit_rows[order[first + b]];
      const ModelInputs mb = inputs.rows(idx);
      const double value =
          objective_and_gradient(model, mb, xi, config.smoothing, use_dropout ? &dropout_rng : nullptr, &grad);
      if (!std::isfinite(value) || !grad.allFinite()) {
        unpack_parameters(model, best);
        throw TrainingFailure("training diverged in epoch " + std::to_string(epoch), last_finite);
      }
      grad.array() *= trainable.array();
      ++step;
      m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
      m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      params.array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + config.epsilon);
      unpack_parameters(model, params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_risk = subset_risk(model, inputs, fit_rows, xi, batch);
    rec.val_risk = val_rows.empty() ? rec.train_risk : subset_risk(model, inputs, val_rows, xi, batch);
    rec.learning_rate = config.learning_rate;
    rec.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    if (!std::isfinite(rec.train_risk) || !std::isfinite(rec.val_risk)) {
      unpack_parameters(model, best);
      throw TrainingFailure("training diverged: non-finite risk in epoch " + std::to_string(epoch), last_finite);
    }
    last_finite = epoch;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    report.stopped_epoch = epoch;
    if (rec.val_risk < report.best_validation_risk) {
      report.best_validation_risk = rec.val_risk;
      report.best_epoch = epoch;
      best = params;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
  }
  unpack_parameters(model, best);
  if (config.drop_unobserved && config.train_structured) drop_unobserved_directions(model.structured, inputs.encoded);
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

GradCheckReport grad_check(const SemiStructuredModel& model, const FunctionalDataset& ds, double tolerance,
                           const SmoothingParams& smoothing, double step) {
  const ModelInputs inputs = prepare_inputs(model, ds);
  const auto xi = model.outcome_grid.quad_weights();
  GradCheckReport report;
  Vector analytic;
  const double objective = objective_and_gradient(model, inputs, xi, smoothing, nullptr, &analytic);
  report.num_params = static_cast<std::size_t>(analytic.size());
  SemiStructuredModel probe = model;
  Vector params = pack_parameters(probe);
  const double floor = 1e-4 * (1.0 + std::abs(objective));
  for (Index p = 0; p < params.size(); ++p) {
    const double saved = params(p);
    params(p) = saved + step;
    unpack_parameters(probe, params);
    const double plus = objective_and_gradient(probe, inputs, xi, smoothing, nullptr, nullptr);
    params(p) = saved - step;
    unpack_parameters(probe, params);
    const double minus = objective_and_gradient(probe, inputs, xi, smoothing, nullptr, nullptr);
    params(p) = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic(p)), std::abs(numeric), floor});
    const double rel = std::abs(analytic(p) - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = static_cast<std::size_t>(p);
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace ssfr
