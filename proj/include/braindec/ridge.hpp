#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "braindec/tensor.hpp"

namespace braindec::ridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-column z-scoring. Population std (ddof 0), floored so it never divides by ~0.
struct Standardizer {
  Vector mean;
  Vector std;
  double floor = 1e-8;

  static Standardizer fit(const Matrix& data, double floor = 1e-8);
  /// Centering only; std is 1 for every column.
  static Standardizer center_only(const Matrix& data);

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  void apply(Matrix& data) const;
  /// Applies to the column range [first, first + data.cols()).
  void apply(Matrix& data, Eigen::Index first) const;
  void invert(Matrix& data, Eigen::Index first = 0) const;
};

enum class Form { primal, dual };
enum class FormChoice { automatic, primal, dual };

struct FitConfig {
  std::vector<double> lambda_grid{1.0};
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  bool standardize_y = true;
  /// Targets solved per block; bounds the transient working set.
  std::size_t target_chunk = 4096;
  FormChoice form = FormChoice::automatic;
  std::size_t memory_budget_bytes = std::size_t{8} << 30;
  double std_floor = 1e-8;

  /// Throws ConfigError on an empty/non-increasing grid or bad fraction.
  void validate() const;
};

/// Fitted multi-target ridge map from voxels (p) to targets (q).
/// Solves in standardized space; `predict` maps back to raw target units.
struct RidgeModel {
  Form form = Form::primal;
  double lambda = 0.0;
  Standardizer x_stats;
  Standardizer y_stats;
  /// q x p, primal form only.
  Matrix weights;
  /// n x q, dual form only.
  Matrix dual_coefs;
  /// Standardized training design (n x p), dual form only.
  Matrix train_design;
  /// Grid evaluated by select_lambda, with the holdout score of each entry.
  std::vector<double> lambda_grid;
  std::vector<double> grid_scores;
  FitConfig config;

  std::size_t n_features() const { return x_stats.size(); }
  std::size_t n_targets() const { return y_stats.size(); }
};

/// Row-major target source that may hold f32 or f64 data; converted to double
/// one column block at a time.
class Targets {
 public:
  explicit Targets(const Matrix& m) : matrix_(&m) {}
  explicit Targets(const Tensor& t);

  std::size_t rows() const;
  std::size_t cols() const;
  Matrix block(std::size_t first_col, std::size_t count) const;
  Matrix rows_block(const std::vector<std::size_t>& rows, std::size_t first_col, std::size_t count) const;
  /// Column statistics accumulated block-wise (centering only when `scale` is false).
  Standardizer stats(bool scale, double floor, std::size_t chunk) const;
  bool all_finite(std::size_t chunk) const;

 private:
  const Matrix* matrix_ = nullptr;
  const Tensor* tensor_ = nullptr;
};

/// Converts a rank-2 f32/f64 tensor to a double matrix.
Matrix to_matrix(const Tensor& t);
/// Converts to a rank-2 f32 tensor.
Tensor to_tensor_f32(const Matrix& m);

/// Bytes the fit is expected to hold at peak, given problem size and config.
std::size_t estimate_fit_bytes(std::size_t n, std::size_t p, std::size_t q, const FitConfig& cfg);

RidgeModel fit(const Matrix& X, const Matrix& Y, const FitConfig& cfg);
RidgeModel fit(const Matrix& X, const Targets& Y, const FitConfig& cfg);

Matrix predict(const RidgeModel& model, const Matrix& X);
/// Same map, emitted as f32 and evaluated in target chunks.
Tensor predict_f32(const RidgeModel& model, const Matrix& X);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> scores;
  std::size_t excluded_targets = 0;
};

/// Seeded holdout split; returns the grid value with the best mean per-target
/// Pearson r on the holdout rows. Ties go to the larger lambda.
LambdaSelection select_lambda(const Matrix& X, const Targets& Y, const FitConfig& cfg);
double select_lambda(const Matrix& X, const Matrix& Y, const FitConfig& cfg);

/// Tie rule on its own: the largest grid value whose score is within `tol` of the best.
double pick_lambda(const std::vector<double>& grid, const std::vector<double>& scores, double tol = 1e-12);

/// Deterministic shuffled holdout split: (train rows, holdout rows).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::size_t n, double fraction,
                                                                          std::uint64_t seed);

/// Primal weights (q x p). Dual models materialize X_s^T alpha; throws
/// CapacityError when q*p doubles exceed `budget_bytes`.
Matrix primal_weights(const RidgeModel& model, std::size_t budget_bytes = std::size_t{2} << 30);

struct L1Options {
  /// Divide by x_std to express weights per raw voxel unit.
  bool raw_space = false;
  std::size_t budget_bytes = std::size_t{2} << 30;
  /// 0 materializes all weights at once (subject to budget); otherwise
  /// dual weights are formed `target_chunk` columns at a time.
  std::size_t target_chunk = 0;
};

/// out[j] = sum over targets of |W[t, j]|, standardized-space by default.
std::vector<double> weight_l1_per_voxel(const RidgeModel& model, const L1Options& opts = {});

void save_model(const RidgeModel& model, const std::filesystem::path& dir);
RidgeModel load_model(const std::filesystem::path& dir);

}  // namespace braindec::ridge
