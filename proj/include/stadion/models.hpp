#pragma once

#include "stadion/common.hpp"

namespace stadion {

// --- Drift feature basis ----------------------------------------------------

struct FeatureEntry {
  enum class Kind { constant, coordinate, monomial, tanh_ridge };
  Kind kind = Kind::constant;
  int i = -1;      // coordinate / first monomial index
  int j = -1;      // second monomial index
  VectorXd w;      // tanh ridge direction (fixed, not learned)
  double c = 0.0;  // tanh ridge offset

  double eval(const VectorXd& x) const;
  // Indices of the variables the feature depends on (used by the sparsity
  // penalty to tell self-terms from cross-variable terms).
  std::vector<int> support() const;
};

struct FeatureBasis {
  std::vector<FeatureEntry> entries;
  int dim = 0;

  int size() const { return static_cast<int>(entries.size()); }
  VectorXd eval(const VectorXd& x) const;

  // {1, x_1, ..., x_d}
  static FeatureBasis affine(int d);
};

// --- Diffusion basis (rank-one fields v_i v_i^T) ----------------------------

struct DiffusionField {
  enum class Kind { unit_coordinate, constant_vector };
  Kind kind = Kind::unit_coordinate;
  int j = 0;
  VectorXd v;

  VectorXd eval(const VectorXd& x, int d) const;
};

struct DiffusionBasis {
  std::vector<DiffusionField> entries;
  int dim = 0;

  int size() const { return static_cast<int>(entries.size()); }
  MatrixXd outer(int index, const VectorXd& x) const;   // v_i(x) v_i(x)^T

  static DiffusionBasis coordinates(int d);              // {e_1, ..., e_d}
};

// --- Interventions -----------------------------------------------------------

// Shift-scale intervention: adds delta to the drift and scales sigma by beta
// on the target coordinates. beta is log-parametrized so positivity holds
// unconditionally under gradient updates.
struct Intervention {
  std::vector<int> targets;
  VectorXd shift;       // delta, one per target
  VectorXd log_scale;   // log(beta), one per target

  static Intervention identity() { return {}; }
  static Intervention shift_on(int target, double delta);
  bool empty() const { return targets.empty(); }
  double beta(int slot) const { return std::exp(log_scale[slot]); }
  void validate(int d) const;
};

// --- The SDE model -----------------------------------------------------------

enum class DriftKind { linear, mlp };
enum class DiffusionMode { diag_exp, basis_cone };

using MaskXb = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// One drift coordinate of the MLP model:
//   f_j(x) = bias + w . sigmoid(U x + v) - x_j,  with column j of U pinned
//   to zero so the mean-reversion scale stays fixed.
struct MlpCoord {
  double bias = 0.0;
  VectorXd w;   // h
  MatrixXd U;   // h x d
  VectorXd v;   // h
};

struct SdeModel {
  int d = 0;
  DriftKind kind = DriftKind::linear;

  // linear drift b(x) = B j(x); fixed_mask marks frozen entries of B.
  FeatureBasis basis;
  MatrixXd B;
  MaskXb fixed_mask;

  // mlp drift
  int hidden = 0;
  std::vector<MlpCoord> coords;

  // diffusion: a(x) = diag(exp(2 s)) or sum_i A_i v_i(x) v_i(x)^T
  DiffusionMode diffusion_mode = DiffusionMode::diag_exp;
  VectorXd s;            // d log-stds
  DiffusionBasis dbasis;
  VectorXd A;            // m cone coefficients

  int feature_count() const { return basis.size(); }
  int diffusion_count() const {
    return diffusion_mode == DiffusionMode::diag_exp ? d : dbasis.size();
  }
};

// Linear model over the affine basis with the self-coordinate weight of each
// row frozen to -1 (removes the speed-scaling ambiguity); free entries zero,
// unit diffusion.
SdeModel make_linear_model(int d);

// Per-coordinate MLP with frozen self-columns; weights drawn zero-mean with
// scale 1/sqrt(d), biases zero, unit diffusion.
SdeModel make_mlp_model(int d, int hidden, std::uint64_t seed);

// Linear SDE dX = M (X - mean) dt + D dB expressed as a model over the
// affine basis (no frozen entries; diagonal D).
SdeModel model_from_linear_system(const MatrixXd& M, const VectorXd& mean,
                                  const VectorXd& D_diag);

// --- Evaluation and value-level backprop -------------------------------------

VectorXd drift_eval(const SdeModel& model, const VectorXd& x,
                    const Intervention& phi);
MatrixXd diffusion_a_eval(const SdeModel& model, const VectorXd& x,
                          const Intervention& phi);

// Gradient containers mirror the parameter containers; frozen entries are
// identically zero.
struct ParamGrad {
  MatrixXd dB;                       // linear
  std::vector<MlpCoord> dmlp;        // mlp (bias/w/U/v slots reused)
  VectorXd ddiff;                    // ds or dA
  VectorXd dshift;                   // per intervention target
  VectorXd dbeta;                    // per intervention target, w.r.t. beta

  ParamGrad& operator+=(const ParamGrad& other);
  ParamGrad& operator*=(double factor);
};

ParamGrad zero_grad(const SdeModel& model, const Intervention& phi);

// Accumulates d<cot, b(x)>/d(theta, delta) into grad.
void drift_vjp(const SdeModel& model, const VectorXd& x,
               const Intervention& phi, const VectorXd& cot, ParamGrad& grad);
ParamGrad drift_vjp(const SdeModel& model, const VectorXd& x,
                    const Intervention& phi, const VectorXd& cot);

// Accumulates d<cot, a(x)>_F/d(s or A, beta) into grad.
void diffusion_vjp(const SdeModel& model, const VectorXd& x,
                   const Intervention& phi, const MatrixXd& cot,
                   ParamGrad& grad);
ParamGrad diffusion_vjp(const SdeModel& model, const VectorXd& x,
                        const Intervention& phi, const MatrixXd& cot);

// --- Flat parameter views (optimizer interface) ------------------------------

// Free model parameters in a fixed order: drift entries (row-major, skipping
// frozen ones), then diffusion parameters.
VectorXd pack_theta(const SdeModel& model);
void unpack_theta(SdeModel& model, const VectorXd& theta);
VectorXd pack_theta_grad(const SdeModel& model, const ParamGrad& grad);

// Intervention parameters as [shift..., log_scale...]; the gradient view
// applies the chain factor beta to dbeta.
VectorXd pack_phi(const Intervention& phi);
void unpack_phi(Intervention& phi, const VectorXd& packed);
VectorXd pack_phi_grad(const Intervention& phi, const ParamGrad& grad);

}  // namespace stadion
