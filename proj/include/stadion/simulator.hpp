#pragma once

#include "stadion/models.hpp"

namespace stadion {

struct SimConfig {
  double dt = 0.01;
  long burn_in_steps = 5000;
  long thinning = 10;
  long n_samples = 1000;
  std::uint64_t seed = 0;
  enum class Init { zeros, gaussian } init = Init::zeros;
  double init_scale = 1.0;
  double divergence_threshold = 1e6;
  int chains = 1;

  void validate() const;
};

// Explicit Euler-Maruyama rollout x <- x + b(x) dt + sigma(x) sqrt(dt) xi.
// Collects n_samples rows after burn-in, one per thinning interval. Noise is
// drawn from a counter-based stream keyed by (seed, chain, step), so chains
// are reproducible regardless of scheduling. Throws Diverged (with the step
// index in the message) when the max-norm of the state exceeds the
// threshold.
Dataset euler_maruyama_sample(const SdeModel& model, const Intervention& phi,
                              const SimConfig& cfg);

// Solves M S + S M^T = -Q for symmetric S via the d^2 x d^2 Kronecker
// system (d <= 64). Stability of M is checked through the residual, not an
// eigendecomposition.
MatrixXd lyapunov_solve(const MatrixXd& M, const MatrixXd& Q);

// n i.i.d. draws from the stationary law N(mean, S) of
// dX = M (X - mean) dt + D dB with Q = D D^T.
Dataset ou_exact_sample(const MatrixXd& M, const VectorXd& mean,
                        const MatrixXd& Q, long n, std::uint64_t seed);

// Symmetric PSD square root; Cholesky when possible, eigenvalue square root
// (with tiny negatives clamped) otherwise.
MatrixXd psd_sqrt(const MatrixXd& S);

}  // namespace stadion
