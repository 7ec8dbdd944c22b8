#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "braindec/tensor.hpp"

namespace braindec::schedule {

struct ScheduleParams {
  int total_steps = 50;
  int training_timesteps = 1000;
  double beta_start = 0.00085;
  double beta_end = 0.012;
  /// Provenance label; the default betas are nominal, not read from a checkpoint.
  std::string label = "nominal";
};

/// Forward-noising table over the sampled steps t = 0..total_steps.
/// Step t >= 1 maps to training timestep floor(t * T / total) - 1, so the last
/// step is the noisiest training timestep. Index 0 is the clean latent.
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(ScheduleParams params = {});

  const ScheduleParams& params() const noexcept { return params_; }
  int total_steps() const noexcept { return params_.total_steps; }
  /// Training timestep for sampled step t (t >= 1).
  int timestep(int t) const;
  /// Cumulative signal fraction at sampled step t; alpha_bar(0) == 1.
  double alpha_bar(int t) const;
  /// Effective per-step beta: 1 - alpha_bar(t) / alpha_bar(t - 1); beta(0) == 0.
  double beta(int t) const;

  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

  /// "t,beta_t,alpha_bar_t" rows for t = 0..total_steps.
  std::string to_csv() const;
  nlohmann::json to_json() const;

 private:
  void check_step(int t) const;

  ScheduleParams params_;
  std::vector<int> timesteps_;
  std::vector<double> alpha_bar_;
};

/// Scaled-linear betas over the full training grid: (linspace(sqrt b0, sqrt b1, T))^2.
std::vector<double> training_betas(const ScheduleParams& params);

/// floor(total * strength); strength outside [0, 1] throws ArgumentError.
int steps_from_strength(int total, double strength);

/// sqrt(ab_t) * z0 + sqrt(1 - ab_t) * eps, computed in double, stored as z0's dtype.
Tensor noise(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule& sched);

struct GuidanceConfig {
  double w_vision = 0.6;
  double w_text = 0.4;
  double strength = 0.75;

  /// Throws ConfigError unless weights are non-negative and sum to 1 and strength is in [0, 1].
  void validate() const;
  nlohmann::json to_json() const;
};

/// w_vision * a_vision + w_text * a_text.
Tensor mix_guidance(const GuidanceConfig& cfg, const Tensor& a_vision, const Tensor& a_text);

}  // namespace braindec::schedule
