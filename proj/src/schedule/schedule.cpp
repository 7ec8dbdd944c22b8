#include "braindec/schedule.hpp"

#include <cmath>
#include <sstream>

namespace braindec::schedule {

std::vector<double> training_betas(const ScheduleParams& params) {
  const int T = params.training_timesteps;
  std::vector<double> betas(static_cast<std::size_t>(T));
  const double lo = std::sqrt(params.beta_start);
  const double hi = std::sqrt(params.beta_end);
  for (int i = 0; i < T; ++i) {
    const double r = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
    const double s = lo + (hi - lo) * r;
    betas[static_cast<std::size_t>(i)] = s * s;
  }
  return betas;
}

DiffusionSchedule::DiffusionSchedule(ScheduleParams params) : params_(std::move(params)) {
  const int N = params_.total_steps;
  const int T = params_.training_timesteps;
  if (N < 1) throw ConfigError("total_steps must be >= 1");
  if (T < N) throw ConfigError("training_timesteps must be >= total_steps");
  if (!(params_.beta_start > 0.0 && params_.beta_end < 1.0 && params_.beta_start <= params_.beta_end)) {
    throw ConfigError("betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  const auto betas = training_betas(params_);
  std::vector<double> cumprod(betas.size());
  double acc = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    acc *= 1.0 - betas[i];
    cumprod[i] = acc;
  }
  timesteps_.assign(static_cast<std::size_t>(N) + 1, -1);
  alpha_bar_.assign(static_cast<std::size_t>(N) + 1, 1.0);
  for (int t = 1; t <= N; ++t) {
    const auto tau = static_cast<int>(static_cast<long long>(t) * T / N) - 1;
    timesteps_[static_cast<std::size_t>(t)] = tau;
    alpha_bar_[static_cast<std::size_t>(t)] = cumprod[static_cast<std::size_t>(tau)];
  }
}

void DiffusionSchedule::check_step(int t) const {
  if (t < 0 || t > params_.total_steps) {
    throw ArgumentError("step " + std::to_string(t) + " outside [0, " + std::to_string(params_.total_steps) + "]");
  }
}

int DiffusionSchedule::timestep(int t) const {
  check_step(t);
  return timesteps_[static_cast<std::size_t>(t)];
}

double DiffusionSchedule::alpha_bar(int t) const {
  check_step(t);
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double DiffusionSchedule::beta(int t) const {
  check_step(t);
  if (t == 0) return 0.0;
  return 1.0 - alpha_bar_[static_cast<std::size_t>(t)] / alpha_bar_[static_cast<std::size_t>(t) - 1];
}

std::string DiffusionSchedule::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,beta_t,alpha_bar_t\n";
  for (int t = 0; t <= params_.total_steps; ++t) os << t << ',' << beta(t) << ',' << alpha_bar(t) << '\n';
  return os.str();
}

nlohmann::json DiffusionSchedule::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (int t = 0; t <= params_.total_steps; ++t) {
    table.push_back({{"t", t}, {"timestep", timesteps_[static_cast<std::size_t>(t)]}, {"beta", beta(t)},
                     {"alpha_bar", alpha_bar(t)}});
  }
  return {{"label", params_.label},
          {"kind", "scaled_linear"},
          {"total_steps", params_.total_steps},
          {"training_timesteps", params_.training_timesteps},
          {"beta_start", params_.beta_start},
          {"beta_end", params_.beta_end},
          {"table", table}};
}

int steps_from_strength(int total, double strength) {
  if (total < 1) throw ArgumentError("total steps must be >= 1");
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ArgumentError("strength " + std::to_string(strength) + " outside [0, 1]");
  }
  return static_cast<int>(std::floor(static_cast<double>(total) * strength));
}

Tensor noise(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
  if (z0.shape() != eps.shape()) {
    throw ArgumentError("z0 shape " + shape_string(z0.shape()) + " differs from noise shape " +
                        shape_string(eps.shape()));
  }
  const double ab = sched.alpha_bar(t);
  if (t == 0) return z0;
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  std::vector<double> out(z0.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0.as_double(i) + b * eps.as_double(i);
  return Tensor::from_doubles(z0.dtype(), z0.shape(), out);
}

void GuidanceConfig::validate() const {
  if (!(w_vision >= 0.0 && w_text >= 0.0)) throw ConfigError("guidance weights must be non-negative");
  if (std::abs(w_vision + w_text - 1.0) > 1e-12) {
    throw ConfigError("guidance weights must sum to 1 (got " + std::to_string(w_vision + w_text) + ")");
  }
  if (!(strength >= 0.0 && strength <= 1.0)) throw ConfigError("strength must lie in [0, 1]");
}

nlohmann::json GuidanceConfig::to_json() const {
  return {{"w_vision", w_vision}, {"w_text", w_text}, {"strength", strength}};
}

Tensor mix_guidance(const GuidanceConfig& cfg, const Tensor& a_vision, const Tensor& a_text) {
  cfg.validate();
  if (a_vision.shape() != a_text.shape()) {
    throw ArgumentError("vision shape " + shape_string(a_vision.shape()) + " differs from text shape " +
                        shape_string(a_text.shape()));
  }
  if (cfg.w_text == 0.0) return a_vision;
  if (cfg.w_vision == 0.0) return a_text;
  std::vector<double> out(a_vision.numel());
  // Interpolation form: identical inputs come back unchanged.
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = a_text.as_double(i);
    out[i] = t + cfg.w_vision * (a_vision.as_double(i) - t);
  }
  return Tensor::from_doubles(a_vision.dtype(), a_vision.shape(), out);
}

}  // namespace braindec::schedule
