#include "stadion/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace stadion {

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "tilted_rbf") return KernelFamily::tilted_rbf;
  if (name == "imq_plus") return KernelFamily::imq_plus;
  fail(ErrorCode::config_error, "unknown kernel family: " + name);
}

const char* to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::tilted_rbf: return "tilted_rbf";
    case KernelFamily::imq_plus: return "imq_plus";
  }
  return "?";
}

KernelSpec make_kernel(KernelFamily family, double bandwidth, int dim) {
  require(dim >= 1, ErrorCode::invalid_input, "kernel dim must be >= 1");
  require(std::isfinite(bandwidth) && bandwidth > 0.0,
          ErrorCode::invalid_input, "kernel bandwidth must be finite and > 0");
  return KernelSpec{family, bandwidth, dim};
}

namespace {

void check_args(const KernelSpec& spec, const VectorXd& x, const VectorXd& y) {
  require(x.size() == spec.dim && y.size() == spec.dim,
          ErrorCode::invalid_input, "kernel argument dimension mismatch");
  require(x.allFinite() && y.allFinite(), ErrorCode::invalid_input,
          "kernel arguments must be finite");
}

double inv_bw2(const KernelSpec& spec) {
  return 1.0 / (spec.bandwidth * spec.bandwidth);
}

// Tilt weight 1/w1(x) with w1(x) = (1 + |x|^2)^(1/2).
double tilt(const VectorXd& x) { return 1.0 / std::sqrt(1.0 + x.squaredNorm()); }

}  // namespace

double kernel_value(const KernelSpec& spec, const VectorXd& x,
                    const VectorXd& y) {
  check_args(spec, x, y);
  const VectorXd z = x - y;
  switch (spec.family) {
    case KernelFamily::rbf:
      return std::exp(-0.5 * inv_bw2(spec) * z.squaredNorm());
    case KernelFamily::tilted_rbf:
      return tilt(x) * tilt(y) *
             std::exp(-0.5 * inv_bw2(spec) * z.squaredNorm());
    case KernelFamily::imq_plus: {
      const double b = 1.0 / std::sqrt(1.0 + z.squaredNorm());
      return tilt(x) * tilt(y) * (b + 1.0 + x.dot(y));
    }
  }
  fail(ErrorCode::unsupported_kernel, "unhandled kernel family");
}

VectorXd kernel_grad_x(const KernelSpec& spec, const VectorXd& x,
                       const VectorXd& y) {
  check_args(spec, x, y);
  const VectorXd z = x - y;
  const double gamma = inv_bw2(spec);
  switch (spec.family) {
    case KernelFamily::rbf:
      return -gamma * std::exp(-0.5 * gamma * z.squaredNorm()) * z;
    case KernelFamily::tilted_rbf: {
      const double k = kernel_value(spec, x, y);
      const double ax = tilt(x);
      return k * (-ax * ax * x - gamma * z);
    }
    case KernelFamily::imq_plus: {
      const double ax = tilt(x), ay = tilt(y);
      const double b = 1.0 / std::sqrt(1.0 + z.squaredNorm());
      const double c = b + 1.0 + x.dot(y);
      return ax * ay * (-ax * ax * c * x + (-(b * b * b) * z + y));
    }
  }
  fail(ErrorCode::unsupported_kernel, "unhandled kernel family");
}

VectorXd kernel_grad_y(const KernelSpec& spec, const VectorXd& x,
                       const VectorXd& y) {
  check_args(spec, x, y);
  const VectorXd z = x - y;
  const double gamma = inv_bw2(spec);
  switch (spec.family) {
    case KernelFamily::rbf:
      return gamma * std::exp(-0.5 * gamma * z.squaredNorm()) * z;
    case KernelFamily::tilted_rbf: {
      const double k = kernel_value(spec, x, y);
      const double ay = tilt(y);
      return k * (-ay * ay * y + gamma * z);
    }
    case KernelFamily::imq_plus: {
      const double ax = tilt(x), ay = tilt(y);
      const double b = 1.0 / std::sqrt(1.0 + z.squaredNorm());
      const double c = b + 1.0 + x.dot(y);
      return ax * ay * (-ay * ay * c * y + (b * b * b * z + x));
    }
  }
  fail(ErrorCode::unsupported_kernel, "unhandled kernel family");
}

MatrixXd kernel_cross_hessian(const KernelSpec& spec, const VectorXd& x,
                              const VectorXd& y) {
  check_args(spec, x, y);
  const int d = spec.dim;
  const VectorXd z = x - y;
  const double gamma = inv_bw2(spec);
  switch (spec.family) {
    case KernelFamily::rbf: {
      const double k = std::exp(-0.5 * gamma * z.squaredNorm());
      MatrixXd h = -(gamma * gamma * k) * (z * z.transpose());
      h.diagonal().array() += gamma * k;
      return h;
    }
    case KernelFamily::tilted_rbf: {
      const double k = kernel_value(spec, x, y);
      const double ax = tilt(x), ay = tilt(y);
      const VectorXd p = -ax * ax * x - gamma * z;
      const VectorXd q = -ay * ay * y + gamma * z;
      MatrixXd h = k * (p * q.transpose());
      h.diagonal().array() += gamma * k;
      return h;
    }
    case KernelFamily::imq_plus: {
      const double ax = tilt(x), ay = tilt(y);
      const double b = 1.0 / std::sqrt(1.0 + z.squaredNorm());
      const double b3 = b * b * b;
      const double c = b + 1.0 + x.dot(y);
      const VectorXd sx = -ax * ax * x;
      const VectorXd sy = -ay * ay * y;
      const VectorXd ex = -b3 * z + y;   // grad_x of the bracket
      const VectorXd ey = b3 * z + x;    // grad_y of the bracket
      MatrixXd h = ax * ay *
                   (c * (sx * sy.transpose()) + sx * ey.transpose() +
                    ex * sy.transpose() -
                    3.0 * b3 * b * b * (z * z.transpose()));
      h.diagonal().array() += ax * ay * (b3 + 1.0);
      (void)d;
      return h;
    }
  }
  fail(ErrorCode::unsupported_kernel, "unhandled kernel family");
}

namespace {

void check_contraction(const KernelSpec& spec, const MatrixXd& a,
                       const char* name) {
  require(a.rows() == spec.dim && a.cols() == spec.dim,
          ErrorCode::invalid_input,
          std::string(name) + " must be d x d");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          ErrorCode::invalid_input, std::string(name) + " must be symmetric");
}

HighOrderTerms high_order_rbf(const KernelSpec& spec, const VectorXd& x,
                              const VectorXd& y, const MatrixXd& a_x,
                              const MatrixXd& a_y) {
  const double g = inv_bw2(spec);
  const VectorXd z = x - y;
  const double k = std::exp(-0.5 * g * z.squaredNorm());
  // d2k/dydy = d2k/dxdx = (g^2 z z^T - g I) k, so the contractions reduce to
  // the scalars phi_* = g^2 z^T a z - g tr(a).
  const double phi_x = g * g * z.dot(a_x * z) - g * a_x.trace();
  const double phi_y = g * g * z.dot(a_y * z) - g * a_y.trace();

  HighOrderTerms out;
  out.t_y = phi_y * k;
  out.g_x_of_t_y = k * (2.0 * g * g * (a_y * z) - g * phi_y * z);
  out.g_y_of_t_x = k * (-2.0 * g * g * (a_x * z) + g * phi_x * z);
  out.tt = k * (2.0 * g * g * a_x.cwiseProduct(a_y).sum() -
                4.0 * g * g * g * z.dot(a_x * (a_y * z)) + phi_x * phi_y);
  out.analytic = true;
  return out;
}

double fd_step(const VectorXd& v) {
  return 1e-3 * (1.0 + v.cwiseAbs().maxCoeff());
}

// tr(a d2k/dvdv) by central differences of the analytic gradient in the
// chosen argument (0 = x, 1 = y).
double trace_hessian_fd(const KernelSpec& spec, const VectorXd& x,
                        const VectorXd& y, const MatrixXd& a, int arg) {
  const int d = spec.dim;
  const VectorXd& v = (arg == 0) ? x : y;
  const double h = fd_step(v);
  MatrixXd hess(d, d);
  for (int q = 0; q < d; ++q) {
    VectorXd vp = v, vm = v;
    vp[q] += h;
    vm[q] -= h;
    VectorXd gp, gm;
    if (arg == 0) {
      gp = kernel_grad_x(spec, vp, y);
      gm = kernel_grad_x(spec, vm, y);
    } else {
      gp = kernel_grad_y(spec, x, vp);
      gm = kernel_grad_y(spec, x, vm);
    }
    hess.col(q) = (gp - gm) / (2.0 * h);
  }
  hess = 0.5 * (hess + hess.transpose()).eval();
  return a.cwiseProduct(hess).sum();
}

HighOrderTerms high_order_fd(const KernelSpec& spec, const VectorXd& x,
                             const VectorXd& y, const MatrixXd& a_x,
                             const MatrixXd& a_y) {
  const int d = spec.dim;
  HighOrderTerms out;
  out.analytic = false;
  out.t_y = trace_hessian_fd(spec, x, y, a_y, 1);

  const double hx = fd_step(x);
  out.g_x_of_t_y.resize(d);
  for (int p = 0; p < d; ++p) {
    VectorXd xp = x, xm = x;
    xp[p] += hx;
    xm[p] -= hx;
    out.g_x_of_t_y[p] = (trace_hessian_fd(spec, xp, y, a_y, 1) -
                         trace_hessian_fd(spec, xm, y, a_y, 1)) /
                        (2.0 * hx);
  }

  const double hy = fd_step(y);
  out.g_y_of_t_x.resize(d);
  for (int q = 0; q < d; ++q) {
    VectorXd yp = y, ym = y;
    yp[q] += hy;
    ym[q] -= hy;
    out.g_y_of_t_x[q] = (trace_hessian_fd(spec, x, yp, a_x, 0) -
                         trace_hessian_fd(spec, x, ym, a_x, 0)) /
                        (2.0 * hy);
  }

  // Hessian in x of t_y, contracted against a_x. Off-diagonal entries use
  // the four-point cross stencil.
  MatrixXd hess(d, d);
  for (int p = 0; p < d; ++p) {
    VectorXd xp = x, xm = x;
    xp[p] += hx;
    xm[p] -= hx;
    hess(p, p) = (trace_hessian_fd(spec, xp, y, a_y, 1) -
                  2.0 * out.t_y +
                  trace_hessian_fd(spec, xm, y, a_y, 1)) /
                 (hx * hx);
    for (int q = p + 1; q < d; ++q) {
      VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[p] += hx; xpp[q] += hx;
      xpm[p] += hx; xpm[q] -= hx;
      xmp[p] -= hx; xmp[q] += hx;
      xmm[p] -= hx; xmm[q] -= hx;
      const double v = (trace_hessian_fd(spec, xpp, y, a_y, 1) -
                        trace_hessian_fd(spec, xpm, y, a_y, 1) -
                        trace_hessian_fd(spec, xmp, y, a_y, 1) +
                        trace_hessian_fd(spec, xmm, y, a_y, 1)) /
                       (4.0 * hx * hx);
      hess(p, q) = v;
      hess(q, p) = v;
    }
  }
  out.tt = a_x.cwiseProduct(hess).sum();
  return out;
}

}  // namespace

HighOrderTerms kernel_high_order(const KernelSpec& spec, const VectorXd& x,
                                 const VectorXd& y, const MatrixXd& a_x,
                                 const MatrixXd& a_y, bool allow_fd) {
  check_args(spec, x, y);
  check_contraction(spec, a_x, "a_x");
  check_contraction(spec, a_y, "a_y");
  if (spec.family == KernelFamily::rbf) {
    return high_order_rbf(spec, x, y, a_x, a_y);
  }
  require(allow_fd, ErrorCode::unsupported_kernel,
          "analytic fourth-order contractions are only available for rbf");
  return high_order_fd(spec, x, y, a_x, a_y);
}

double median_heuristic_bandwidth(const MatrixXd& samples) {
  const long n = samples.rows();
  require(n >= 2, ErrorCode::insufficient_data,
          "median bandwidth needs at least 2 samples");
  const long cap = 1024;
  const long stride = (n + cap - 1) / cap;
  std::vector<long> rows;
  for (long i = 0; i < n; i += stride) rows.push_back(i);

  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = i + 1; j < rows.size(); ++j) {
      dists.push_back((samples.row(rows[i]) - samples.row(rows[j])).norm());
    }
  }
  const size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  if (!(med > 0.0)) med = 1.0;   // degenerate data: all rows identical
  return med;
}

}  // namespace stadion
