#include <chrono>
#include <cstdio>
#include <limits>

#include <Eigen/Cholesky>

#include "ssfr/app.hpp"
#include "ssfr/io.hpp"
#include "ssfr/kernels.hpp"
#include "ssfr/memtrack.hpp"

namespace ssfr::app {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

// Array path: Adam over mini-batches on cached encodings. Peak is measured
// above the cache so it reflects the working memory of fitting.
BenchRow array_path(const FunctionalDataset& ds, const Json& config) {
  const Json& b = config.at("bench");
  ModelSpec spec;
  spec.num_s_basis = spec.num_t_basis = b.at("num_basis").get<int>();
  TrainConfig tcfg;
  tcfg.batch_size = b.at("batch_size").get<int>();
  tcfg.max_epochs = b.at("epochs").get<int>();
  tcfg.patience = tcfg.max_epochs;
  tcfg.validation_fraction = 0.0;
  tcfg.seed = config.at("seed").get<std::uint64_t>();

  BenchRow row;
  row.path = "array";
  row.status = "ok";
  const auto start = clock_type::now();
  const std::size_t base = memtrack::current_bytes();
  SemiStructuredModel model = build_model(ds, spec);
  const ModelInputs inputs = prepare_inputs(model, ds);
  const std::size_t cached = memtrack::current_bytes();
  row.cache_bytes = cached > base ? cached - base : 0;
  memtrack::reset_peak();
  train(model, inputs, tcfg);
  const std::size_t peak = memtrack::peak_bytes();
  row.peak_bytes = peak > cached ? peak - cached : 0;
  row.seconds = seconds_since(start);
  return row;
}

// Naive path: long-format design matrix with one row per (curve, t) pair and
// a penalized least-squares solve of the same objective.
BenchRow naive_path(const FunctionalDataset& ds, const Json& config) {
  const int k = config.at("bench").at("num_basis").get<int>();
  const double ls = 1.0, lt = 1.0;
  const Index n = ds.n();
  const Index q = ds.outcome.cols();
  const Index j_count = static_cast<Index>(ds.num_predictors());
  const Index p = k + j_count * k * k;

  BenchRow row;
  row.path = "naive";
  const double need = (static_cast<double>(n * q) * static_cast<double>(p) + static_cast<double>(p) * p * 2.0) * 8.0;
  if (need > static_cast<double>(memory_budget(config))) {
    row.status = "over_budget";
    return row;
  }
  row.status = "ok";
  const auto start = clock_type::now();
  const std::size_t base = memtrack::current_bytes();
  memtrack::reset_peak();
  {
    BasisCache cache;
    const auto tb = cache.get(ds.outcome_grid, k, 3);
    std::vector<RowMatrix> encs;
    std::vector<const RowMatrix*> ptrs;
    encs.reserve(ds.num_predictors());
    for (std::size_t j = 0; j < ds.num_predictors(); ++j) {
      const auto sb = cache.get(ds.predictor_grids[j], k, 3);
      encs.push_back(encode_rows(ds.predictors[j], ds.predictor_grids[j], *sb));
    }
    for (const auto& e : encs) ptrs.push_back(&e);
    const RowMatrix x = kernels::omega_rows(ptrs, tb->eval_matrix(), 0, n);

    // Row weights xi_q / n, response in the same observation-major order.
    Vector w(n * q), y(n * q);
    const auto xi = ds.outcome_grid.quad_weights();
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < q; ++t) {
        w(i * q + t) = xi[static_cast<std::size_t>(t)] / static_cast<double>(n);
        y(i * q + t) = ds.outcome(i, t);
      }
    Matrix lhs = Matrix::Zero(p, p);
    lhs.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose() * w.cwiseSqrt().asDiagonal());
    lhs = lhs.selfadjointView<Eigen::Lower>();
    Vector rhs = x.transpose() * w.cwiseProduct(y);

    const Matrix& pt = tb->penalty();
    lhs.topLeftCorner(k, k) += lt * pt;
    for (Index j = 0; j < j_count; ++j) {
      const Index off = k + j * k * k;
      const Matrix& ps = cache.get(ds.predictor_grids[static_cast<std::size_t>(j)], k, 3)->penalty();
      for (Index u = 0; u < k; ++u)
        for (Index a = 0; a < k; ++a)
          for (Index c = 0; c < k; ++c) {
            lhs(off + u * k + a, off + u * k + c) += ls * ps(a, c);  // I_U (x) P_s
            lhs(off + a * k + u, off + c * k + u) += lt * pt(a, c);  // P_t (x) I_K
          }
    }
    const Vector theta = lhs.ldlt().solve(rhs);
    if (!theta.allFinite()) row.status = "singular";
  }
  const std::size_t peak = memtrack::peak_bytes();
  row.peak_bytes = peak > base ? peak - base : 0;
  row.seconds = seconds_since(start);
  return row;
}

}  // namespace

std::vector<BenchRow> run_bench(const Json& config) {
  const Json& b = config.at("bench");
  const auto ns = b.at("n").get<std::vector<int>>();
  const auto js = b.at("J").get<std::vector<int>>();
  const auto rs = b.at("R").get<std::vector<int>>();
  const bool naive = b.at("naive").get<bool>();
  if (!memtrack::active())
    std::fprintf(stderr, "warning: heap tracking inactive; peak_bytes will read 0\n");

  std::vector<BenchRow> rows;
  for (int r : rs)
    for (int j : js)
      for (int n : ns) {
        SimConfig sim;
        sim.n = n;
        sim.R = sim.Q = r;
        sim.J = j;
        sim.seed = config.at("seed").get<std::uint64_t>();
        const FunctionalDataset ds = generate(sim).data;
        std::vector<BenchRow> cell{array_path(ds, config)};
        if (naive) cell.push_back(naive_path(ds, config));
        for (auto& row : cell) {
          row.n = n;
          row.J = j;
          row.R = r;
          row.Q = r;
          std::fprintf(stderr, "bench: n=%d J=%d R=%d %s %s peak=%zu s=%.3f\n", n, j, r, row.path.c_str(),
                       row.status.c_str(), row.peak_bytes, row.seconds);
          rows.push_back(row);
        }
      }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "n,J,R,Q,path,status,peak_bytes,cache_bytes,seconds\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.J) + "," + std::to_string(r.R) + "," + std::to_string(r.Q) +
           "," + r.path + "," + r.status + "," + std::to_string(r.peak_bytes) + "," + std::to_string(r.cache_bytes) +
           "," + io::format_double(r.seconds) + "\n";
  }
  return out;
}

}  // namespace ssfr::app
