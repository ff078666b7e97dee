#pragma once

#include "stadion/discrepancy.hpp"
#include "stadion/simulator.hpp"

namespace stadion {

struct TrainConfig {
  long steps = 1000;
  long batch_size = 256;
  double lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_sparsity = 0.001;
  Estimator estimator = Estimator::linear_pairs;
  KernelSpec kernel;
  std::uint64_t seed = 0;
  double grad_clip = 10.0;   // global-norm cap per step; <= 0 disables
  bool shuffle_pairs = false; // reshuffle batch order before pairing

  void validate() const;
};

struct TrainEnv {
  Dataset data;
  std::vector<int> targets;   // known intervention targets; empty for env 0
};

struct FitResult {
  SdeModel model;
  std::vector<Intervention> phis;   // one per environment, phis[0] identity
  std::vector<double> loss_trace;   // objective value per step
  double wall_time_ms = 0.0;
};

// One uniformly sampled environment per step; batches are drawn without
// replacement within a per-environment epoch; Adam updates the model and
// the sampled environment's intervention only. The observational phi stays
// frozen at the identity.
FitResult train(const std::vector<TrainEnv>& envs, const SdeModel& init,
                const TrainConfig& cfg);

// Sparsity penalty: L1 on cross-variable drift weights (group-L2 over input
// columns for the MLP) plus L1 on the intervention shifts. Subgradient is 0
// at exact zeros.
struct RegResult {
  double value = 0.0;
  ParamGrad model_grad;
  std::vector<VectorXd> phi_grads;   // packed as [dshift..., dlogbeta...]
};
RegResult regularizer(const SdeModel& model,
                      const std::vector<Intervention>& phis);

struct CalibrationConfig {
  double tolerance = 0.02;
  int max_iterations = 12;
  SimConfig sim;               // used by the simulation path
  bool prefer_closed_form = true;
};

// Finds the shift delta on `target` whose stationary mean of that coordinate
// matches desired_mean: one linear solve for affine drift models, secant
// iteration on simulated means otherwise. Throws NoConvergence (reporting
// the best delta and residual) if the tolerance is not reached.
Intervention calibrate_test_intervention(const SdeModel& model, int target,
                                         double desired_mean,
                                         const CalibrationConfig& cfg);

// Stationary mean of an affine-drift model, if the closed form applies.
bool affine_stationary_mean(const SdeModel& model, const Intervention& phi,
                            VectorXd& mean_out);

}  // namespace stadion
