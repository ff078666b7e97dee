#pragma once

#include "stadion/kernels.hpp"
#include "stadion/models.hpp"

namespace stadion {

enum class Estimator { linear_pairs, u_statistic };
Estimator estimator_from_string(const std::string& name);
const char* to_string(Estimator estimator);

// One evaluated summand of a pairwise loss together with the cotangents of
// the drift/diffusion values it was assembled from. Chaining the cotangents
// through drift_vjp / diffusion_vjp yields exact parameter gradients; the
// losses depend on b and a only through their values at the two points.
struct PairTerm {
  double value = 0.0;
  VectorXd d_bx, d_by;
  MatrixXd d_ax, d_ay;
  bool has_cotangents = true;
};

// S1 S2 K(x, y) for K = k I_d:
//   4 <b(x), b(y)> k + 2 <b(x), a(y) grad_y k> + 2 <b(y), a(x) grad_x k>
//   + <a(x) a(y), d2k/dxdy>_F
PairTerm skds_pair(const SdeModel& model, const Intervention& phi,
                   const KernelSpec& kernel, const VectorXd& x,
                   const VectorXd& y);

// L1 L2 k(x, y): the generator applied to both kernel arguments. Requires
// fourth-order kernel contractions; analytic for rbf, finite-difference
// fallback otherwise (value only, no cotangents).
PairTerm kds_pair_term(const SdeModel& model, const Intervention& phi,
                       const KernelSpec& kernel, const VectorXd& x,
                       const VectorXd& y, bool allow_fd = true);
double kds_pair(const SdeModel& model, const Intervention& phi,
                const KernelSpec& kernel, const VectorXd& x, const VectorXd& y,
                bool allow_fd = true);

// Empirical estimates over a sample: disjoint consecutive pairs in dataset
// order (touches each sample once, O(N)), or the mean over all ordered
// pairs i != j.
double skds_empirical(const SdeModel& model, const Intervention& phi,
                      const KernelSpec& kernel, const Dataset& data,
                      Estimator estimator);
double kds_empirical(const SdeModel& model, const Intervention& phi,
                     const KernelSpec& kernel, const Dataset& data,
                     Estimator estimator, bool allow_fd = true);

// Mean and a per-term standard error of the pairwise summands (for the
// u-statistic the terms are dependent, so the error is only indicative).
struct EmpiricalStats {
  double mean = 0.0;
  double se = 0.0;
  long n_terms = 0;
};
EmpiricalStats skds_empirical_stats(const SdeModel& model,
                                    const Intervention& phi,
                                    const KernelSpec& kernel,
                                    const Dataset& data, Estimator estimator);

// Loss together with exact parameter and intervention gradients.
struct LossGrad {
  double loss = 0.0;
  ParamGrad grad;
};
LossGrad skds_grad(const SdeModel& model, const Intervention& phi,
                   const KernelSpec& kernel, const Dataset& data,
                   Estimator estimator);
// Analytic for rbf. For other families the gradient falls back to central
// differences over the packed parameters (slow; flagged in the result).
struct KdsGradResult {
  double loss = 0.0;
  ParamGrad grad;
  bool analytic = true;
};
KdsGradResult kds_grad(const SdeModel& model, const Intervention& phi,
                       const KernelSpec& kernel, const Dataset& data,
                       Estimator estimator);

// Empirical representer evaluated at a query point:
//   g_hat(y) = mean_i [ 2 b(x_i) k(x_i, y) + a(x_i) grad_x k(x_i, y) ]
// and its Jacobian in y.
VectorXd representer_eval(const SdeModel& model, const Intervention& phi,
                          const KernelSpec& kernel, const Dataset& data,
                          const VectorXd& y);
MatrixXd representer_grad(const SdeModel& model, const Intervention& phi,
                          const KernelSpec& kernel, const Dataset& data,
                          const VectorXd& y);

// --- Quadratic form of the linear parametrization ----------------------------
//
// For drift b = B j(x) and diffusion a = sum_i A_i v_i v_i^T the empirical
// loss is theta^T R_hat theta with theta = [rows of B | A]. The factor 2 of
// the drift term in the operator is absorbed into the assembly so theta
// stacks raw parameters.
struct QuadraticForm {
  MatrixXd R_hat;    // (d*l + m) square, symmetric
  int d = 0, l = 0, m = 0;
  long n_pairs = 0;

  long size() const { return static_cast<long>(d) * l + m; }
};

QuadraticForm build_R_hat(const FeatureBasis& basis,
                          const DiffusionBasis& dbasis,
                          const KernelSpec& kernel, const Dataset& data,
                          Estimator estimator);

double skds_quadratic(const QuadraticForm& q, const VectorXd& theta);

// Smallest eigenvalue of the symmetric R_hat; the empirical witness for the
// quasiconvexity margin.
double min_eig_sym(const QuadraticForm& q);

// Assembles the linear model whose empirical loss matches
// skds_quadratic(q, theta); used to cross-check the identity.
SdeModel linear_model_from_theta(const FeatureBasis& basis,
                                 const DiffusionBasis& dbasis,
                                 const VectorXd& theta);

// --- Structured evaluation of the linear parametrization ---------------------
//
// For drift b = B j(x) and diffusion a = sum_i A_i e_i e_i^T, both losses are
// quadratic forms in theta = [rows of B | A]. These assemble the form
// directly from the kernel contractions (blockwise, without the value-level
// cotangent machinery) and return loss = theta' R theta and its gradient.
// The kds variant is analytic and requires the rbf family.
struct FormEval {
  double loss = 0.0;
  VectorXd grad;
};
FormEval skds_linear_form(const FeatureBasis& basis, const KernelSpec& kernel,
                          const Dataset& data, const VectorXd& theta,
                          Estimator estimator = Estimator::linear_pairs);
FormEval kds_linear_form(const FeatureBasis& basis, const KernelSpec& kernel,
                         const Dataset& data, const VectorXd& theta,
                         Estimator estimator = Estimator::linear_pairs);

// --- Timing comparison --------------------------------------------------------

struct TimingReport {
  double skds_ms_mean = 0.0, skds_ms_sd = 0.0;
  double kds_ms_mean = 0.0, kds_ms_sd = 0.0;
  double speedup = 0.0;              // kds mean / skds mean
  double skds_loss = 0.0, kds_loss = 0.0;
  int repeats = 0;
  bool kds_gradient_analytic = true;
};

// Wall-clock for one loss+gradient evaluation of each objective on the same
// random linear model and data; both paths pinned single-threaded.
TimingReport timing_bench(KernelFamily family, int d, long n, int repeats,
                          std::uint64_t seed);

}  // namespace stadion
