#pragma once

#include "stadion/common.hpp"

namespace stadion {

enum class KernelFamily { rbf, tilted_rbf, imq_plus };

KernelFamily kernel_family_from_string(const std::string& name);
const char* to_string(KernelFamily family);

// A positive-definite scalar kernel with the derivative contractions needed
// by the losses in this library (order <= 2 analytically for every family,
// order <= 4 analytically for the RBF and by finite differences otherwise).
struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  double bandwidth = 1.0;   // length-scale; ignored by imq_plus
  int dim = 1;
};

KernelSpec make_kernel(KernelFamily family, double bandwidth, int dim);

double kernel_value(const KernelSpec& spec, const VectorXd& x,
                    const VectorXd& y);

VectorXd kernel_grad_x(const KernelSpec& spec, const VectorXd& x,
                       const VectorXd& y);
VectorXd kernel_grad_y(const KernelSpec& spec, const VectorXd& x,
                       const VectorXd& y);

// Entry (p, q) is d^2 k / dx_p dy_q.
MatrixXd kernel_cross_hessian(const KernelSpec& spec, const VectorXd& x,
                              const VectorXd& y);

// Fourth-order contractions against symmetric matrices a_x, a_y:
//   t_y        = tr(a_y d2k/dydy)
//   g_x_of_t_y = grad_x t_y
//   g_y_of_t_x = grad_y tr(a_x d2k/dxdx)
//   tt         = tr(a_x gradgrad_x t_y)
struct HighOrderTerms {
  double t_y = 0.0;
  VectorXd g_x_of_t_y;
  VectorXd g_y_of_t_x;
  double tt = 0.0;
  bool analytic = true;   // false when the finite-difference path was taken
};

// The analytic path is implemented for the RBF family. Other families use a
// central-difference fallback over the analytic first/second derivatives
// (step 1e-3 scaled by 1 + the max-norm of the differentiated argument);
// pass allow_fd = false to reject them instead.
HighOrderTerms kernel_high_order(const KernelSpec& spec, const VectorXd& x,
                                 const VectorXd& y, const MatrixXd& a_x,
                                 const MatrixXd& a_y, bool allow_fd = true);

// Median pairwise distance of the sample rows; the conventional default
// length-scale when none is configured. Subsamples at most 1024 rows
// (evenly strided) to bound the quadratic pair count.
double median_heuristic_bandwidth(const MatrixXd& samples);

}  // namespace stadion
