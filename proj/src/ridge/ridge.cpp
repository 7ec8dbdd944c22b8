#include "braindec/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <spdlog/spdlog.h>

namespace braindec::ridge {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// --- Standardizer -----------------------------------------------------------

Standardizer Standardizer::fit(const Matrix& data, double floor) {
  Standardizer s;
  s.floor = floor;
  const auto n = static_cast<double>(data.rows());
  s.mean = data.colwise().mean().transpose();
  s.std.resize(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double var = (data.col(j).array() - s.mean[j]).square().sum() / n;
    s.std[j] = std::max(std::sqrt(var), floor);
  }
  return s;
}

Standardizer Standardizer::center_only(const Matrix& data) {
  Standardizer s;
  s.mean = data.colwise().mean().transpose();
  s.std = Vector::Ones(data.cols());
  return s;
}

void Standardizer::apply(Matrix& data) const { apply(data, 0); }

void Standardizer::apply(Matrix& data, Eigen::Index first) const {
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    data.col(j) = (data.col(j).array() - mean[first + j]) / std[first + j];
  }
}

void Standardizer::invert(Matrix& data, Eigen::Index first) const {
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    data.col(j) = data.col(j).array() * std[first + j] + mean[first + j];
  }
}

// --- Config -----------------------------------------------------------------

void FitConfig::validate() const {
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i])) {
      throw ConfigError("lambda grid entries must be finite and >= 0");
    }
    if (i > 0 && lambda_grid[i] <= lambda_grid[i - 1]) throw ConfigError("lambda grid must be strictly increasing");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must lie in (0, 1)");
  if (target_chunk == 0) throw ConfigError("target_chunk must be positive");
  if (!(std_floor > 0.0)) throw ConfigError("std floor must be positive");
}

// --- Targets ----------------------------------------------------------------

Targets::Targets(const Tensor& t) : tensor_(&t) {
  if (t.rank() != 2 || (t.dtype() != DType::f32 && t.dtype() != DType::f64)) {
    throw ArgumentError("targets must be a rank-2 f32/f64 tensor, got " + std::string(dtype_name(t.dtype())) + " " +
                        shape_string(t.shape()));
  }
}

std::size_t Targets::rows() const {
  return matrix_ ? static_cast<std::size_t>(matrix_->rows()) : tensor_->dim(0);
}

std::size_t Targets::cols() const {
  return matrix_ ? static_cast<std::size_t>(matrix_->cols()) : tensor_->dim(1);
}

Matrix Targets::block(std::size_t first_col, std::size_t count) const {
  const auto c0 = static_cast<Eigen::Index>(first_col);
  const auto c = static_cast<Eigen::Index>(count);
  if (matrix_) return matrix_->middleCols(c0, c);
  const auto n = static_cast<Eigen::Index>(rows());
  const auto q = static_cast<Eigen::Index>(cols());
  if (tensor_->dtype() == DType::f32) {
    Eigen::Map<const RowMajorF> m(tensor_->values<float>().data(), n, q);
    return m.middleCols(c0, c).cast<double>();
  }
  Eigen::Map<const RowMajorD> m(tensor_->values<double>().data(), n, q);
  return m.middleCols(c0, c);
}

Matrix Targets::rows_block(const std::vector<std::size_t>& rows, std::size_t first_col, std::size_t count) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(count));
  const std::size_t q = cols();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t j = first_col + c;
      double v;
      if (matrix_) {
        v = (*matrix_)(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(j));
      } else if (tensor_->dtype() == DType::f32) {
        v = tensor_->values<float>()[rows[r] * q + j];
      } else {
        v = tensor_->values<double>()[rows[r] * q + j];
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

Standardizer Targets::stats(bool scale, double floor, std::size_t chunk) const {
  Standardizer s;
  s.floor = floor;
  s.mean.resize(static_cast<Eigen::Index>(cols()));
  s.std.resize(static_cast<Eigen::Index>(cols()));
  for (std::size_t c0 = 0; c0 < cols(); c0 += chunk) {
    const std::size_t c = std::min(chunk, cols() - c0);
    const Matrix b = block(c0, c);
    const Standardizer part = scale ? Standardizer::fit(b, floor) : Standardizer::center_only(b);
    s.mean.segment(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(c)) = part.mean;
    s.std.segment(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(c)) = part.std;
  }
  return s;
}

bool Targets::all_finite(std::size_t chunk) const {
  for (std::size_t c0 = 0; c0 < cols(); c0 += chunk) {
    if (!block(c0, std::min(chunk, cols() - c0)).allFinite()) return false;
  }
  return true;
}

Matrix to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw ArgumentError("expected a rank-2 tensor, got " + shape_string(t.shape()));
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  const auto p = static_cast<Eigen::Index>(t.dim(1));
  if (t.dtype() == DType::f32) return Eigen::Map<const RowMajorF>(t.values<float>().data(), n, p).cast<double>();
  if (t.dtype() == DType::f64) return Eigen::Map<const RowMajorD>(t.values<double>().data(), n, p);
  Matrix m(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = t.as_double(static_cast<std::size_t>(i * p + j));
  return m;
}

Tensor to_tensor_f32(const Matrix& m) {
  Tensor t(DType::f32, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMajorF>(t.values<float>().data(), m.rows(), m.cols()) = m.cast<float>();
  return t;
}

// --- Fitting ----------------------------------------------------------------

namespace {

Form resolve_form(std::size_t n, std::size_t p, FormChoice choice) {
  switch (choice) {
    case FormChoice::primal: return Form::primal;
    case FormChoice::dual: return Form::dual;
    case FormChoice::automatic: break;
  }
  return p <= n ? Form::primal : Form::dual;
}

void require_finite(const Matrix& X, const Targets& Y, std::size_t chunk) {
  if (!X.allFinite()) throw DataError("design matrix contains NaN or Inf");
  if (!Y.all_finite(chunk)) throw DataError("target matrix contains NaN or Inf");
}

// Gram of the rows (dual) or columns (primal) of `Xs`, lower triangle filled
// then symmetrized.
Matrix gram(const Matrix& Xs, Form form) {
  const Eigen::Index m = form == Form::primal ? Xs.cols() : Xs.rows();
  Matrix G = Matrix::Zero(m, m);
  if (form == Form::primal) {
    G.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
  } else {
    G.selfadjointView<Eigen::Lower>().rankUpdate(Xs);
  }
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

Eigen::LLT<Matrix> factorize(Matrix G, double lambda) {
  const double max_diag = G.diagonal().size() ? G.diagonal().maxCoeff() : 0.0;
  G.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(G);
  const char* advice = "; use lambda > 0";
  if (llt.info() != Eigen::Success) {
    throw RankDeficiencyError("ridge system is not positive definite at lambda=" + std::to_string(lambda) + advice);
  }
  if (lambda == 0.0) {
    const Vector piv = Matrix(llt.matrixL()).diagonal();
    const double min_sq = piv.size() ? piv.array().square().minCoeff() : 0.0;
    if (min_sq <= 1e-10 * std::max(max_diag, 1.0)) {
      throw RankDeficiencyError("design is rank deficient at lambda=0" + std::string(advice));
    }
  }
  return llt;
}

}  // namespace

std::size_t estimate_fit_bytes(std::size_t n, std::size_t p, std::size_t q, const FitConfig& cfg) {
  const Form form = resolve_form(n, p, cfg.form);
  const std::size_t d = sizeof(double);
  const std::size_t m = form == Form::primal ? p : n;
  const std::size_t c = std::min(cfg.target_chunk, q);
  std::size_t bytes = n * p * d;           // standardized design
  bytes += 2 * m * m * d;                  // Gram + factor
  bytes += 3 * std::max(n, p) * c * d;     // chunk buffers
  bytes += (form == Form::primal ? q * p : n * q) * d;
  bytes += 4 * q * d;                      // target standardizer
  if (cfg.lambda_grid.size() > 1) bytes += 2 * m * m * d;  // eigendecomposition for selection
  return bytes;
}

RidgeModel fit(const Matrix& X, const Matrix& Y, const FitConfig& cfg) { return fit(X, Targets(Y), cfg); }

RidgeModel fit(const Matrix& X, const Targets& Y, const FitConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  const std::size_t q = Y.cols();
  if (n < 2) throw ArgumentError("ridge fit needs at least 2 samples");
  if (Y.rows() != n) {
    throw ArgumentError("design has " + std::to_string(n) + " rows, targets have " + std::to_string(Y.rows()));
  }
  require_finite(X, Y, cfg.target_chunk);

  const std::size_t need = estimate_fit_bytes(n, p, q, cfg);
  if (need > cfg.memory_budget_bytes) {
    throw CapacityError("ridge fit needs about " + std::to_string(need >> 20) + " MiB, budget is " +
                        std::to_string(cfg.memory_budget_bytes >> 20) +
                        " MiB; split the targets into separate fits or raise the budget");
  }

  RidgeModel model;
  model.config = cfg;
  model.form = resolve_form(n, p, cfg.form);
  if (cfg.lambda_grid.size() > 1) {
    LambdaSelection sel = select_lambda(X, Y, cfg);
    model.lambda = sel.lambda;
    model.lambda_grid = cfg.lambda_grid;
    model.grid_scores = std::move(sel.scores);
  } else {
    model.lambda = cfg.lambda_grid.front();
  }

  model.x_stats = Standardizer::fit(X, cfg.std_floor);
  Matrix Xs = X;
  model.x_stats.apply(Xs);
  model.y_stats = Y.stats(cfg.standardize_y, cfg.std_floor, cfg.target_chunk);

  const auto llt = factorize(gram(Xs, model.form), model.lambda);
  if (model.form == Form::primal) {
    model.weights.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
  } else {
    model.dual_coefs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  }
  for (std::size_t c0 = 0; c0 < q; c0 += cfg.target_chunk) {
    const std::size_t c = std::min(cfg.target_chunk, q - c0);
    Matrix Yc = Y.block(c0, c);
    model.y_stats.apply(Yc, static_cast<Eigen::Index>(c0));
    if (model.form == Form::primal) {
      const Matrix rhs = Xs.transpose() * Yc;
      model.weights.middleRows(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(c)) =
          llt.solve(rhs).transpose();
    } else {
      model.dual_coefs.middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(c)) = llt.solve(Yc);
    }
  }
  if (model.form == Form::dual) model.train_design = std::move(Xs);
  return model;
}

// --- Prediction -------------------------------------------------------------

namespace {

Matrix standardized_input(const RidgeModel& model, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.n_features()) {
    throw ArgumentError("input has " + std::to_string(X.cols()) + " features, model expects " +
                        std::to_string(model.n_features()));
  }
  Matrix Xs = X;
  model.x_stats.apply(Xs);
  return Xs;
}

}  // namespace

Matrix predict(const RidgeModel& model, const Matrix& X) {
  const Matrix Xs = standardized_input(model, X);
  Matrix out;
  if (model.form == Form::primal) {
    out = Xs * model.weights.transpose();
  } else {
    out = (Xs * model.train_design.transpose()) * model.dual_coefs;
  }
  model.y_stats.invert(out);
  return out;
}

Tensor predict_f32(const RidgeModel& model, const Matrix& X) {
  const Matrix Xs = standardized_input(model, X);
  const std::size_t m = static_cast<std::size_t>(Xs.rows());
  const std::size_t q = model.n_targets();
  Tensor out(DType::f32, {m, q});
  Eigen::Map<RowMajorF> dst(out.values<float>().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q));
  Matrix K;
  if (model.form == Form::dual) K = Xs * model.train_design.transpose();
  const std::size_t chunk = std::max<std::size_t>(model.config.target_chunk, 1);
  for (std::size_t c0 = 0; c0 < q; c0 += chunk) {
    const auto first = static_cast<Eigen::Index>(c0);
    const auto c = static_cast<Eigen::Index>(std::min(chunk, q - c0));
    Matrix part = model.form == Form::primal ? Matrix(Xs * model.weights.middleRows(first, c).transpose())
                                             : Matrix(K * model.dual_coefs.middleCols(first, c));
    model.y_stats.invert(part, first);
    dst.middleCols(first, c) = part.cast<float>();
  }
  return out;
}

// --- Lambda selection -------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::size_t n, double fraction,
                                                                          std::uint64_t seed) {
  auto n_hold = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  n_hold = std::max<std::size_t>(n_hold, 2);
  if (n < n_hold + 2) {
    throw ArgumentError("holdout split of " + std::to_string(n) + " rows leaves fewer than 2 rows on a side");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with a fixed engine so splits agree across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(hold)};
}

double pick_lambda(const std::vector<double>& grid, const std::vector<double>& scores, double tol) {
  if (grid.empty() || grid.size() != scores.size()) throw ArgumentError("grid and scores must be non-empty and aligned");
  double best = -std::numeric_limits<double>::infinity();
  for (double s : scores) best = std::max(best, s);
  if (!std::isfinite(best)) throw DegenerateInputError("no lambda in the grid produced a finite holdout score");
  double chosen = grid.front();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (scores[i] >= best - tol) chosen = std::max(chosen, grid[i]);
  }
  return chosen;
}

double select_lambda(const Matrix& X, const Matrix& Y, const FitConfig& cfg) {
  return select_lambda(X, Targets(Y), cfg).lambda;
}

LambdaSelection select_lambda(const Matrix& X, const Targets& Y, const FitConfig& cfg) {
  cfg.validate();
  LambdaSelection sel;
  if (cfg.lambda_grid.size() == 1) {
    sel.lambda = cfg.lambda_grid.front();
    sel.scores = {std::numeric_limits<double>::quiet_NaN()};
    return sel;
  }
  const auto n = static_cast<std::size_t>(X.rows());
  if (Y.rows() != n) throw ArgumentError("design and targets differ in row count");
  const auto [train_rows, hold_rows] = holdout_split(n, cfg.holdout_fraction, cfg.seed);

  auto gather = [&X](const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
    return out;
  };
  Matrix Xtr = gather(train_rows);
  Matrix Xho = gather(hold_rows);
  const Standardizer xs = Standardizer::fit(Xtr, cfg.std_floor);
  xs.apply(Xtr);
  xs.apply(Xho);

  // Every grid value shares one eigendecomposition G = V S V^T, so holdout
  // predictions are B diag(1/(s + lambda)) A with A, B independent of lambda.
  const Form form = resolve_form(train_rows.size(), static_cast<std::size_t>(X.cols()), cfg.form);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram(Xtr, form));
  const Vector s = eig.eigenvalues().cwiseMax(0.0);
  const Matrix& V = eig.eigenvectors();
  const Matrix B = form == Form::primal ? Matrix(Xho * V) : Matrix((Xho * Xtr.transpose()) * V);
  const double s_max = s.size() ? s.maxCoeff() : 0.0;

  const std::size_t G = cfg.lambda_grid.size();
  std::vector<double> r_sum(G, 0.0);
  std::vector<bool> usable(G, true);
  for (std::size_t g = 0; g < G; ++g) {
    if (s.size() && s.minCoeff() + cfg.lambda_grid[g] <= 1e-12 * std::max(s_max, 1.0)) usable[g] = false;
  }

  const std::size_t q = Y.cols();
  std::size_t included = 0;
  for (std::size_t c0 = 0; c0 < q; c0 += cfg.target_chunk) {
    const std::size_t c = std::min(cfg.target_chunk, q - c0);
    Matrix Ytr = Y.rows_block(train_rows, c0, c);
    const Matrix Yho = Y.rows_block(hold_rows, c0, c);
    const Standardizer ys =
        cfg.standardize_y ? Standardizer::fit(Ytr, cfg.std_floor) : Standardizer::center_only(Ytr);
    ys.apply(Ytr);
    const Matrix A = form == Form::primal ? Matrix(V.transpose() * (Xtr.transpose() * Ytr)) : Matrix(V.transpose() * Ytr);

    const Eigen::RowVectorXd ho_mean = Yho.colwise().mean();
    const Matrix ho_c = Yho.rowwise() - ho_mean;
    const Eigen::RowVectorXd ho_norm = ho_c.colwise().norm();
    std::vector<bool> keep(c);
    for (std::size_t j = 0; j < c; ++j) {
      keep[j] = ho_norm[static_cast<Eigen::Index>(j)] > 0.0;
      if (keep[j]) ++included;
    }

    for (std::size_t g = 0; g < G; ++g) {
      if (!usable[g]) continue;
      const Vector shrink = (s.array() + cfg.lambda_grid[g]).inverse();
      Matrix P = B * shrink.asDiagonal() * A;
      ys.invert(P);
      const Matrix pc = P.rowwise() - P.colwise().mean();
      for (std::size_t j = 0; j < c; ++j) {
        if (!keep[j]) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        const double pn = pc.col(jj).norm();
        const double r = pn > 0.0 ? pc.col(jj).dot(ho_c.col(jj)) / (pn * ho_norm[jj]) : 0.0;
        r_sum[g] += r;
      }
    }
  }
  sel.excluded_targets = q - included;
  if (sel.excluded_targets > 0) {
    spdlog::warn("select_lambda: {} target column(s) constant on the holdout split; excluded from the score",
                 sel.excluded_targets);
  }
  if (included == 0) throw DegenerateInputError("every target column is constant on the holdout split");

  sel.scores.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    sel.scores[g] = usable[g] ? r_sum[g] / static_cast<double>(included) : -std::numeric_limits<double>::infinity();
  }
  sel.lambda = pick_lambda(cfg.lambda_grid, sel.scores);
  return sel;
}

// --- Weight analysis --------------------------------------------------------

Matrix primal_weights(const RidgeModel& model, std::size_t budget_bytes) {
  if (model.form == Form::primal) return model.weights;
  const std::size_t need = model.n_targets() * model.n_features() * sizeof(double);
  if (need > budget_bytes) {
    throw CapacityError("materializing " + std::to_string(model.n_targets()) + " x " +
                        std::to_string(model.n_features()) + " weights needs " + std::to_string(need >> 20) +
                        " MiB over a budget of " + std::to_string(budget_bytes >> 20) +
                        " MiB; process the targets in chunks");
  }
  return (model.train_design.transpose() * model.dual_coefs).transpose();
}

namespace {

// Adds |W(t, j)| to acc[j] one target at a time, so every path sums in target order.
void add_abs_rows(Vector& acc, const Matrix& W) {
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    double s = acc(j);
    for (Eigen::Index t = 0; t < W.rows(); ++t) s += std::abs(W(t, j));
    acc(j) = s;
  }
}

}  // namespace

std::vector<double> weight_l1_per_voxel(const RidgeModel& model, const L1Options& opts) {
  const auto p = static_cast<Eigen::Index>(model.n_features());
  Vector acc = Vector::Zero(p);
  if (model.form == Form::primal) {
    add_abs_rows(acc, model.weights);
  } else if (opts.target_chunk == 0) {
    add_abs_rows(acc, primal_weights(model, opts.budget_bytes));
  } else {
    const std::size_t q = model.n_targets();
    const std::size_t need = opts.target_chunk * model.n_features() * sizeof(double);
    if (need > opts.budget_bytes) {
      throw CapacityError("a chunk of " + std::to_string(opts.target_chunk) + " targets needs " +
                          std::to_string(need >> 20) + " MiB; use a smaller target chunk");
    }
    for (std::size_t c0 = 0; c0 < q; c0 += opts.target_chunk) {
      const auto c = static_cast<Eigen::Index>(std::min(opts.target_chunk, q - c0));
      const Matrix Wc =
          (model.train_design.transpose() * model.dual_coefs.middleCols(static_cast<Eigen::Index>(c0), c)).transpose();
      add_abs_rows(acc, Wc);
    }
  }
  if (opts.raw_space) acc.array() /= model.x_stats.std.array();
  return {acc.data(), acc.data() + acc.size()};
}

}  // namespace braindec::ridge
