#include <cmath>
#include <limits>
#include <fstream>

#include "json.hpp"

#include "braindec/npy.hpp"
#include "braindec/ridge.hpp"

namespace braindec::ridge {
namespace {

using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor to_tensor_f64(const Matrix& m) {
  Tensor t(DType::f64, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMajorD>(t.values<double>().data(), m.rows(), m.cols()) = m;
  return t;
}

Tensor vector_tensor(const Vector& v) {
  return Tensor::from<double>({static_cast<std::size_t>(v.size())}, std::span<const double>(v.data(), v.size()));
}

Vector read_vector(const std::filesystem::path& path, std::size_t expected) {
  const Tensor t = npy::read(path);
  if (t.rank() != 1 || t.numel() != expected) {
    throw ConsistencyError("'" + path.string() + "' has shape " + shape_string(t.shape()) + ", expected (" +
                           std::to_string(expected) + ",)");
  }
  const auto v = t.to_doubles();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix read_matrix(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  const Tensor t = npy::read(path);
  if (t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
    throw ConsistencyError("'" + path.string() + "' has shape " + shape_string(t.shape()) + ", expected (" +
                           std::to_string(rows) + ", " + std::to_string(cols) + ")");
  }
  return to_matrix(t);
}

const char* form_name(FormChoice f) {
  switch (f) {
    case FormChoice::automatic: return "auto";
    case FormChoice::primal: return "primal";
    case FormChoice::dual: return "dual";
  }
  return "auto";
}

}  // namespace

void save_model(const RidgeModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  npy::write(vector_tensor(model.x_stats.mean), dir / "x_mean.npy");
  npy::write(vector_tensor(model.x_stats.std), dir / "x_std.npy");
  npy::write(vector_tensor(model.y_stats.mean), dir / "y_mean.npy");
  npy::write(vector_tensor(model.y_stats.std), dir / "y_std.npy");
  std::size_t n_train = 0;
  if (model.form == Form::primal) {
    npy::write(to_tensor_f64(model.weights), dir / "weights.npy");
  } else {
    npy::write(to_tensor_f64(model.dual_coefs), dir / "dual_coefs.npy");
    npy::write(to_tensor_f64(model.train_design), dir / "train_design.npy");
    n_train = static_cast<std::size_t>(model.dual_coefs.rows());
  }

  const auto& cfg = model.config;
  nlohmann::json meta = {
      {"format", "braindec.ridge_model"},
      {"version", 1},
      {"form", model.form == Form::primal ? "primal" : "dual"},
      {"lambda", model.lambda},
      {"n_features", model.n_features()},
      {"n_targets", model.n_targets()},
      {"n_train", n_train},
      {"x_std_floor", model.x_stats.floor},
      {"lambda_grid", model.lambda_grid},
      {"grid_scores", nlohmann::json::array()},
      {"config",
       {{"lambda_grid", cfg.lambda_grid},
        {"holdout_fraction", cfg.holdout_fraction},
        {"seed", cfg.seed},
        {"standardize_y", cfg.standardize_y},
        {"target_chunk", cfg.target_chunk},
        {"form", form_name(cfg.form)},
        {"memory_budget_bytes", cfg.memory_budget_bytes},
        {"std_floor", cfg.std_floor}}},
  };
  for (double s : model.grid_scores) {
    meta["grid_scores"].push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr));
  }
  std::ofstream out(dir / "model.json");
  if (!out) throw PathError("cannot write '" + (dir / "model.json").string() + "'");
  out << meta.dump(2) << '\n';
}

RidgeModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw PathError("no ridge model at '" + dir.string() + "' (model.json missing)");
  nlohmann::json meta;
  RidgeModel model;
  try {
    in >> meta;
    if (meta.at("format") != "braindec.ridge_model" || meta.at("version") != 1) {
      throw ConsistencyError("'" + dir.string() + "' is not a version-1 ridge model");
    }
    const auto p = meta.at("n_features").get<std::size_t>();
    const auto q = meta.at("n_targets").get<std::size_t>();
    model.form = meta.at("form") == "primal" ? Form::primal : Form::dual;
    model.lambda = meta.at("lambda").get<double>();
    model.lambda_grid = meta.at("lambda_grid").get<std::vector<double>>();
    for (const auto& s : meta.at("grid_scores")) {
      model.grid_scores.push_back(s.is_null() ? std::numeric_limits<double>::quiet_NaN() : s.get<double>());
    }
    const auto& c = meta.at("config");
    model.config.lambda_grid = c.at("lambda_grid").get<std::vector<double>>();
    model.config.holdout_fraction = c.at("holdout_fraction").get<double>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.standardize_y = c.at("standardize_y").get<bool>();
    model.config.target_chunk = c.at("target_chunk").get<std::size_t>();
    const auto form = c.at("form").get<std::string>();
    model.config.form = form == "primal" ? FormChoice::primal : form == "dual" ? FormChoice::dual : FormChoice::automatic;
    model.config.memory_budget_bytes = c.at("memory_budget_bytes").get<std::size_t>();
    model.config.std_floor = c.at("std_floor").get<double>();

    model.x_stats.floor = meta.at("x_std_floor").get<double>();
    model.x_stats.mean = read_vector(dir / "x_mean.npy", p);
    model.x_stats.std = read_vector(dir / "x_std.npy", p);
    model.y_stats.mean = read_vector(dir / "y_mean.npy", q);
    model.y_stats.std = read_vector(dir / "y_std.npy", q);
    if (model.form == Form::primal) {
      model.weights = read_matrix(dir / "weights.npy", q, p);
    } else {
      const auto n = meta.at("n_train").get<std::size_t>();
      model.dual_coefs = read_matrix(dir / "dual_coefs.npy", n, q);
      model.train_design = read_matrix(dir / "train_design.npy", n, p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("malformed model metadata in '" + dir.string() + "': " + e.what());
  }
  return model;
}

}  // namespace braindec::ridge
