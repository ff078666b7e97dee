#include "stadion/discrepancy.hpp"

#include <chrono>
#include <cmath>

namespace stadion {

Estimator estimator_from_string(const std::string& name) {
  if (name == "linear" || name == "linear_pairs") return Estimator::linear_pairs;
  if (name == "ustat" || name == "u_statistic") return Estimator::u_statistic;
  fail(ErrorCode::config_error, "unknown estimator: " + name);
}

const char* to_string(Estimator estimator) {
  return estimator == Estimator::linear_pairs ? "linear_pairs" : "u_statistic";
}

namespace {

// Fixed partition of the term index space. Blocks are summed internally in
// index order and combined in block order, so results are bitwise identical
// whether blocks run serially or across threads.
struct BlockRange {
  long lo, hi;
};

std::vector<BlockRange> make_blocks(long n_terms) {
  const long n_blocks = n_terms < 256 ? 1 : 64;
  std::vector<BlockRange> blocks(n_blocks);
  for (long b = 0; b < n_blocks; ++b) {
    blocks[b].lo = n_terms * b / n_blocks;
    blocks[b].hi = n_terms * (b + 1) / n_blocks;
  }
  return blocks;
}

struct PairIndex {
  long n_terms = 0;
  long n = 0;
  Estimator estimator = Estimator::linear_pairs;

  // Term -> (row_i, row_j) of the dataset.
  std::pair<long, long> operator()(long t) const {
    if (estimator == Estimator::linear_pairs) return {2 * t, 2 * t + 1};
    // Unordered pairs (i, j), i < j, in lexicographic order.
    long i = static_cast<long>(
        n - 0.5 - std::sqrt((n - 0.5) * (n - 0.5) - 2.0 * t));
    if (i < 0) i = 0;
    if (i > n - 2) i = n - 2;
    while (i + 1 <= n - 2 && offset(i + 1) <= t) ++i;
    while (i > 0 && offset(i) > t) --i;
    const long j = i + 1 + (t - offset(i));
    return {i, j};
  }

  // Number of pairs preceding those that start at row i.
  long offset(long i) const { return i * n - i - i * (i - 1) / 2; }
};

PairIndex make_pairs(long n, Estimator estimator) {
  require(n >= 2, ErrorCode::insufficient_data,
          "pairwise estimators need at least 2 samples");
  PairIndex idx;
  idx.n = n;
  idx.estimator = estimator;
  idx.n_terms = estimator == Estimator::linear_pairs ? n / 2
                                                     : n * (n - 1) / 2;
  return idx;
}

struct EvalCache {
  std::vector<VectorXd> b;
  std::vector<MatrixXd> a;
};

EvalCache eval_cache(const SdeModel& model, const Intervention& phi,
                     const Dataset& data) {
  EvalCache cache;
  const long n = data.rows();
  cache.b.reserve(n);
  cache.a.reserve(n);
  for (long i = 0; i < n; ++i) {
    const VectorXd x = data.X.row(i).transpose();
    cache.b.push_back(drift_eval(model, x, phi));
    cache.a.push_back(diffusion_a_eval(model, x, phi));
  }
  return cache;
}

PairTerm skds_pair_values(const KernelSpec& kernel, const VectorXd& x,
                          const VectorXd& y, const VectorXd& bx,
                          const VectorXd& by, const MatrixXd& ax,
                          const MatrixXd& ay) {
  const double k = kernel_value(kernel, x, y);
  const VectorXd gx = kernel_grad_x(kernel, x, y);
  const VectorXd gy = kernel_grad_y(kernel, x, y);
  const MatrixXd ch = kernel_cross_hessian(kernel, x, y);

  PairTerm out;
  const VectorXd ay_gy = ay * gy;
  const VectorXd ax_gx = ax * gx;
  out.value = 4.0 * bx.dot(by) * k + 2.0 * bx.dot(ay_gy) +
              2.0 * by.dot(ax_gx) + (ax * ay).cwiseProduct(ch).sum();
  out.d_bx = 4.0 * k * by + 2.0 * ay_gy;
  out.d_by = 4.0 * k * bx + 2.0 * ax_gx;
  out.d_ax = 2.0 * by * gx.transpose() + ch * ay;
  out.d_ay = 2.0 * bx * gy.transpose() + ax * ch;
  return out;
}

PairTerm kds_pair_values(const KernelSpec& kernel, const VectorXd& x,
                         const VectorXd& y, const VectorXd& bx,
                         const VectorXd& by, const MatrixXd& ax,
                         const MatrixXd& ay, bool allow_fd) {
  const MatrixXd ch = kernel_cross_hessian(kernel, x, y);
  const HighOrderTerms ho = kernel_high_order(kernel, x, y, ax, ay, allow_fd);

  PairTerm out;
  out.value = bx.dot(ch * by) + 0.5 * bx.dot(ho.g_x_of_t_y) +
              0.5 * by.dot(ho.g_y_of_t_x) + 0.25 * ho.tt;
  if (!ho.analytic) {
    out.has_cotangents = false;
    return out;
  }

  // Analytic cotangents, RBF only. With gamma = 1/bw^2, z = x - y and
  // phi_* = gamma^2 z'az - gamma tr(a), all four terms are short
  // polynomials in z.
  const double g = 1.0 / (kernel.bandwidth * kernel.bandwidth);
  const VectorXd z = x - y;
  const double k = std::exp(-0.5 * g * z.squaredNorm());
  const double phi_x = g * g * z.dot(ax * z) - g * ax.trace();
  const double phi_y = g * g * z.dot(ay * z) - g * ay.trace();
  const MatrixXd zz = z * z.transpose();
  MatrixXd dphi = g * g * zz;            // d(phi)/d(a), same for x and y
  dphi.diagonal().array() -= g;

  out.d_bx = ch * by + 0.5 * ho.g_x_of_t_y;
  out.d_by = ch.transpose() * bx + 0.5 * ho.g_y_of_t_x;
  out.d_ax = 0.5 * k * (-2.0 * g * g * by * z.transpose() +
                        g * by.dot(z) * dphi) +
             0.25 * k * (2.0 * g * g * ay - 4.0 * g * g * g * zz * ay +
                         phi_y * dphi);
  out.d_ay = 0.5 * k * (2.0 * g * g * bx * z.transpose() -
                        g * bx.dot(z) * dphi) +
             0.25 * k * (2.0 * g * g * ax - 4.0 * g * g * g * ax * zz +
                         phi_x * dphi);
  return out;
}

enum class LossKind { skds, kds };

PairTerm loss_pair(LossKind kind, const KernelSpec& kernel, const VectorXd& x,
                   const VectorXd& y, const VectorXd& bx, const VectorXd& by,
                   const MatrixXd& ax, const MatrixXd& ay, bool allow_fd) {
  return kind == LossKind::skds
             ? skds_pair_values(kernel, x, y, bx, by, ax, ay)
             : kds_pair_values(kernel, x, y, bx, by, ax, ay, allow_fd);
}

EmpiricalStats empirical_stats(LossKind kind, const SdeModel& model,
                               const Intervention& phi,
                               const KernelSpec& kernel, const Dataset& data,
                               Estimator estimator, bool allow_fd) {
  require(data.dim() == model.d, ErrorCode::invalid_input,
          "dataset dimension does not match the model");
  const PairIndex pairs = make_pairs(data.rows(), estimator);
  const EvalCache cache = eval_cache(model, phi, data);
  const auto blocks = make_blocks(pairs.n_terms);
  const long n_blocks = static_cast<long>(blocks.size());
  std::vector<double> sum(n_blocks, 0.0), sumsq(n_blocks, 0.0);
  const int workers = worker_count();

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) \
    if (workers > 1)
#endif
  for (long b = 0; b < n_blocks; ++b) {
    double acc = 0.0, acc2 = 0.0;
    for (long t = blocks[b].lo; t < blocks[b].hi; ++t) {
      const auto [i, j] = pairs(t);
      const VectorXd xi = data.X.row(i).transpose();
      const VectorXd xj = data.X.row(j).transpose();
      const double v = loss_pair(kind, kernel, xi, xj, cache.b[i], cache.b[j],
                                 cache.a[i], cache.a[j], allow_fd)
                           .value;
      acc += v;
      acc2 += v * v;
    }
    sum[b] = acc;
    sumsq[b] = acc2;
  }

  double total = 0.0, total2 = 0.0;
  for (long b = 0; b < n_blocks; ++b) {
    total += sum[b];
    total2 += sumsq[b];
  }
  EmpiricalStats stats;
  stats.n_terms = pairs.n_terms;
  stats.mean = total / static_cast<double>(pairs.n_terms);
  if (pairs.n_terms > 1) {
    const double var = (total2 - pairs.n_terms * stats.mean * stats.mean) /
                       static_cast<double>(pairs.n_terms - 1);
    stats.se = std::sqrt(std::max(0.0, var) /
                         static_cast<double>(pairs.n_terms));
  }
  return stats;
}

LossGrad loss_grad(LossKind kind, const SdeModel& model,
                   const Intervention& phi, const KernelSpec& kernel,
                   const Dataset& data, Estimator estimator, bool allow_fd) {
  require(data.dim() == model.d, ErrorCode::invalid_input,
          "dataset dimension does not match the model");
  const PairIndex pairs = make_pairs(data.rows(), estimator);
  const EvalCache cache = eval_cache(model, phi, data);
  const auto blocks = make_blocks(pairs.n_terms);
  const long n_blocks = static_cast<long>(blocks.size());
  std::vector<double> sum(n_blocks, 0.0);
  std::vector<ParamGrad> partial(n_blocks);
  const int workers = worker_count();

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) \
    if (workers > 1)
#endif
  for (long b = 0; b < n_blocks; ++b) {
    double acc = 0.0;
    ParamGrad grad = zero_grad(model, phi);
    for (long t = blocks[b].lo; t < blocks[b].hi; ++t) {
      const auto [i, j] = pairs(t);
      const VectorXd xi = data.X.row(i).transpose();
      const VectorXd xj = data.X.row(j).transpose();
      const PairTerm term = loss_pair(kind, kernel, xi, xj, cache.b[i],
                                      cache.b[j], cache.a[i], cache.a[j],
                                      allow_fd);
      require(term.has_cotangents, ErrorCode::unsupported_kernel,
              "no analytic gradient path for this kernel family");
      acc += term.value;
      drift_vjp(model, xi, phi, term.d_bx, grad);
      drift_vjp(model, xj, phi, term.d_by, grad);
      diffusion_vjp(model, xi, phi, term.d_ax, grad);
      diffusion_vjp(model, xj, phi, term.d_ay, grad);
    }
    sum[b] = acc;
    partial[b] = std::move(grad);
  }

  LossGrad out;
  out.grad = zero_grad(model, phi);
  double total = 0.0;
  for (long b = 0; b < n_blocks; ++b) {
    total += sum[b];
    out.grad += partial[b];
  }
  out.loss = total / static_cast<double>(pairs.n_terms);
  out.grad *= 1.0 / static_cast<double>(pairs.n_terms);
  return out;
}

}  // namespace

PairTerm skds_pair(const SdeModel& model, const Intervention& phi,
                   const KernelSpec& kernel, const VectorXd& x,
                   const VectorXd& y) {
  return skds_pair_values(kernel, x, y, drift_eval(model, x, phi),
                          drift_eval(model, y, phi),
                          diffusion_a_eval(model, x, phi),
                          diffusion_a_eval(model, y, phi));
}

PairTerm kds_pair_term(const SdeModel& model, const Intervention& phi,
                       const KernelSpec& kernel, const VectorXd& x,
                       const VectorXd& y, bool allow_fd) {
  return kds_pair_values(kernel, x, y, drift_eval(model, x, phi),
                         drift_eval(model, y, phi),
                         diffusion_a_eval(model, x, phi),
                         diffusion_a_eval(model, y, phi), allow_fd);
}

double kds_pair(const SdeModel& model, const Intervention& phi,
                const KernelSpec& kernel, const VectorXd& x, const VectorXd& y,
                bool allow_fd) {
  return kds_pair_term(model, phi, kernel, x, y, allow_fd).value;
}

double skds_empirical(const SdeModel& model, const Intervention& phi,
                      const KernelSpec& kernel, const Dataset& data,
                      Estimator estimator) {
  return empirical_stats(LossKind::skds, model, phi, kernel, data, estimator,
                         true)
      .mean;
}

double kds_empirical(const SdeModel& model, const Intervention& phi,
                     const KernelSpec& kernel, const Dataset& data,
                     Estimator estimator, bool allow_fd) {
  return empirical_stats(LossKind::kds, model, phi, kernel, data, estimator,
                         allow_fd)
      .mean;
}

EmpiricalStats skds_empirical_stats(const SdeModel& model,
                                    const Intervention& phi,
                                    const KernelSpec& kernel,
                                    const Dataset& data, Estimator estimator) {
  return empirical_stats(LossKind::skds, model, phi, kernel, data, estimator,
                         true);
}

LossGrad skds_grad(const SdeModel& model, const Intervention& phi,
                   const KernelSpec& kernel, const Dataset& data,
                   Estimator estimator) {
  return loss_grad(LossKind::skds, model, phi, kernel, data, estimator, true);
}

KdsGradResult kds_grad(const SdeModel& model, const Intervention& phi,
                       const KernelSpec& kernel, const Dataset& data,
                       Estimator estimator) {
  KdsGradResult out;
  if (kernel.family == KernelFamily::rbf) {
    const LossGrad lg =
        loss_grad(LossKind::kds, model, phi, kernel, data, estimator, true);
    out.loss = lg.loss;
    out.grad = lg.grad;
    out.analytic = true;
    return out;
  }

  // Central differences over the packed parameters.
  out.analytic = false;
  out.loss = kds_empirical(model, phi, kernel, data, estimator, true);
  SdeModel work = model;
  Intervention wphi = phi;
  const VectorXd theta0 = pack_theta(model);
  VectorXd dtheta(theta0.size());
  for (long i = 0; i < theta0.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta0[i]));
    VectorXd tp = theta0, tm = theta0;
    tp[i] += h;
    tm[i] -= h;
    unpack_theta(work, tp);
    const double fp = kds_empirical(work, wphi, kernel, data, estimator, true);
    unpack_theta(work, tm);
    const double fm = kds_empirical(work, wphi, kernel, data, estimator, true);
    dtheta[i] = (fp - fm) / (2.0 * h);
  }
  unpack_theta(work, theta0);

  const VectorXd phi0 = pack_phi(phi);
  VectorXd dphi_packed(phi0.size());
  for (long i = 0; i < phi0.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(phi0[i]));
    VectorXd pp = phi0, pm = phi0;
    pp[i] += h;
    pm[i] -= h;
    unpack_phi(wphi, pp);
    const double fp = kds_empirical(work, wphi, kernel, data, estimator, true);
    unpack_phi(wphi, pm);
    const double fm = kds_empirical(work, wphi, kernel, data, estimator, true);
    dphi_packed[i] = (fp - fm) / (2.0 * h);
  }

  // Re-express the flat views in the dense gradient containers.
  out.grad = zero_grad(model, phi);
  long pos = 0;
  if (model.kind == DriftKind::linear) {
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (!model.fixed_mask(j, q)) out.grad.dB(j, q) = dtheta[pos++];
      }
    }
  } else {
    for (size_t j = 0; j < model.coords.size(); ++j) {
      MlpCoord& g = out.grad.dmlp[j];
      g.bias = dtheta[pos++];
      for (int r = 0; r < g.w.size(); ++r) g.w[r] = dtheta[pos++];
      for (int r = 0; r < g.U.rows(); ++r) {
        for (int p = 0; p < g.U.cols(); ++p) {
          if (p != static_cast<int>(j)) g.U(r, p) = dtheta[pos++];
        }
      }
      for (int r = 0; r < g.v.size(); ++r) g.v[r] = dtheta[pos++];
    }
  }
  for (int i = 0; i < model.diffusion_count(); ++i) {
    out.grad.ddiff[i] = dtheta[pos++];
  }
  const long k = static_cast<long>(phi.targets.size());
  for (long t = 0; t < k; ++t) {
    out.grad.dshift[t] = dphi_packed[t];
    // packed slot holds d/d(log beta); convert back to d/d(beta)
    out.grad.dbeta[t] = dphi_packed[k + t] / phi.beta(static_cast<int>(t));
  }
  return out;
}

VectorXd representer_eval(const SdeModel& model, const Intervention& phi,
                          const KernelSpec& kernel, const Dataset& data,
                          const VectorXd& y) {
  require(data.rows() >= 1, ErrorCode::insufficient_data,
          "representer needs at least 1 sample");
  VectorXd acc = VectorXd::Zero(model.d);
  for (long i = 0; i < data.rows(); ++i) {
    const VectorXd x = data.X.row(i).transpose();
    acc += 2.0 * kernel_value(kernel, x, y) * drift_eval(model, x, phi) +
           diffusion_a_eval(model, x, phi) * kernel_grad_x(kernel, x, y);
  }
  return acc / static_cast<double>(data.rows());
}

MatrixXd representer_grad(const SdeModel& model, const Intervention& phi,
                          const KernelSpec& kernel, const Dataset& data,
                          const VectorXd& y) {
  require(data.rows() >= 1, ErrorCode::insufficient_data,
          "representer needs at least 1 sample");
  MatrixXd acc = MatrixXd::Zero(model.d, model.d);
  for (long i = 0; i < data.rows(); ++i) {
    const VectorXd x = data.X.row(i).transpose();
    acc += 2.0 * drift_eval(model, x, phi) *
               kernel_grad_y(kernel, x, y).transpose() +
           diffusion_a_eval(model, x, phi) * kernel_cross_hessian(kernel, x, y);
  }
  return acc / static_cast<double>(data.rows());
}

namespace {

// The raw bilinear matrix of one pair: theta^T M theta = S1 S2 K(x, y) for
// the linear parametrization. theta = [rows of B | A]; the drift factor 2
// of the operator is folded in so the entries pair raw parameters.
MatrixXd pair_M(const FeatureBasis& basis, const DiffusionBasis& dbasis,
                const KernelSpec& kernel, const VectorXd& x,
                const VectorXd& y) {
  const int d = basis.dim;
  const int l = basis.size();
  const int m = dbasis.size();
  const long dl = static_cast<long>(d) * l;

  const double k = kernel_value(kernel, x, y);
  const VectorXd gx = kernel_grad_x(kernel, x, y);
  const VectorXd gy = kernel_grad_y(kernel, x, y);
  const VectorXd jx = basis.eval(x);
  const VectorXd jy = basis.eval(y);

  MatrixXd M = MatrixXd::Zero(dl + m, dl + m);
  const MatrixXd drift_block = (4.0 * k) * (jx * jy.transpose());
  for (int i = 0; i < d; ++i) {
    M.block(static_cast<long>(i) * l, static_cast<long>(i) * l, l, l) =
        drift_block;
  }

  if (m > 0) {
    const MatrixXd ch = kernel_cross_hessian(kernel, x, y);
    std::vector<MatrixXd> wx(m), wy(m);
    for (int s = 0; s < m; ++s) {
      wx[s] = dbasis.outer(s, x);
      wy[s] = dbasis.outer(s, y);
    }
    for (int t = 0; t < m; ++t) {
      const VectorXd wy_gy = wy[t] * gy;
      for (int i = 0; i < d; ++i) {
        for (int q = 0; q < l; ++q) {
          M(static_cast<long>(i) * l + q, dl + t) +=
              2.0 * jx[q] * wy_gy[i];
        }
      }
    }
    for (int s = 0; s < m; ++s) {
      const VectorXd wx_gx = wx[s] * gx;
      for (int i = 0; i < d; ++i) {
        for (int q = 0; q < l; ++q) {
          M(dl + s, static_cast<long>(i) * l + q) +=
              2.0 * jy[q] * wx_gx[i];
        }
      }
      for (int t = 0; t < m; ++t) {
        M(dl + s, dl + t) += (wx[s] * wy[t]).cwiseProduct(ch).sum();
      }
    }
  }
  return M;
}

}  // namespace

QuadraticForm build_R_hat(const FeatureBasis& basis,
                          const DiffusionBasis& dbasis,
                          const KernelSpec& kernel, const Dataset& data,
                          Estimator estimator) {
  require(data.dim() == basis.dim, ErrorCode::invalid_input,
          "dataset dimension does not match the basis");
  const PairIndex pairs = make_pairs(data.rows(), estimator);
  QuadraticForm q;
  q.d = basis.dim;
  q.l = basis.size();
  q.m = dbasis.size();
  q.n_pairs = pairs.n_terms;

  const auto blocks = make_blocks(pairs.n_terms);
  const long n_blocks = static_cast<long>(blocks.size());
  const long p = q.size();
  std::vector<MatrixXd> partial(n_blocks);
  const int workers = worker_count();

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) \
    if (workers > 1)
#endif
  for (long b = 0; b < n_blocks; ++b) {
    MatrixXd acc = MatrixXd::Zero(p, p);
    for (long t = blocks[b].lo; t < blocks[b].hi; ++t) {
      const auto [i, j] = pairs(t);
      const VectorXd xi = data.X.row(i).transpose();
      const VectorXd xj = data.X.row(j).transpose();
      const MatrixXd M1 = pair_M(basis, dbasis, kernel, xi, xj);
      acc += 0.5 * (M1 + M1.transpose());
      if (estimator == Estimator::u_statistic) {
        const MatrixXd M2 = pair_M(basis, dbasis, kernel, xj, xi);
        acc += 0.5 * (M2 + M2.transpose());
      }
    }
    partial[b] = std::move(acc);
  }

  MatrixXd total = MatrixXd::Zero(p, p);
  for (long b = 0; b < n_blocks; ++b) total += partial[b];
  const double scale =
      estimator == Estimator::linear_pairs
          ? 1.0 / static_cast<double>(pairs.n_terms)
          : 1.0 / static_cast<double>(pairs.n * (pairs.n - 1));
  q.R_hat = scale * total;
  return q;
}

double skds_quadratic(const QuadraticForm& q, const VectorXd& theta) {
  require(theta.size() == q.size(), ErrorCode::invalid_input,
          "theta length does not match the quadratic form");
  return theta.dot(q.R_hat * theta);
}

double min_eig_sym(const QuadraticForm& q) {
  require(q.R_hat.allFinite(), ErrorCode::invalid_input,
          "quadratic form has non-finite entries");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(q.R_hat,
                                                 Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

SdeModel linear_model_from_theta(const FeatureBasis& basis,
                                 const DiffusionBasis& dbasis,
                                 const VectorXd& theta) {
  const int d = basis.dim;
  const int l = basis.size();
  const int m = dbasis.size();
  require(theta.size() == static_cast<long>(d) * l + m,
          ErrorCode::invalid_input, "theta length mismatch");
  SdeModel model;
  model.d = d;
  model.kind = DriftKind::linear;
  model.basis = basis;
  model.B = MatrixXd(d, l);
  for (int i = 0; i < d; ++i) {
    model.B.row(i) = theta.segment(static_cast<long>(i) * l, l).transpose();
  }
  model.fixed_mask = MaskXb::Constant(d, l, false);
  model.diffusion_mode = DiffusionMode::basis_cone;
  model.dbasis = dbasis;
  model.A = theta.tail(m);
  return model;
}

TimingReport timing_bench(KernelFamily family, int d, long n, int repeats,
                          std::uint64_t seed) {
  require(d >= 1 && n >= 2 && repeats >= 1, ErrorCode::invalid_input,
          "timing_bench needs d >= 1, n >= 2, repeats >= 1");
  set_worker_override(1);   // both paths timed single-threaded

  Dataset data;
  data.X = MatrixXd(n, d);
  const CounterRng rng(seed, 0xbe9cULL);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      data.X(i, j) = rng.normal(static_cast<std::uint64_t>(i) * d + j);
    }
  }

  SdeModel model;
  model.d = d;
  model.kind = DriftKind::linear;
  model.basis = FeatureBasis::affine(d);
  model.B = MatrixXd(d, d + 1);
  SeqRng setup(mix64(seed) ^ 0x7177ULL);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= d; ++j) model.B(i, j) = scale * setup.normal();
  }
  model.fixed_mask = MaskXb::Constant(d, d + 1, false);
  model.diffusion_mode = DiffusionMode::basis_cone;
  model.dbasis = DiffusionBasis::coordinates(d);
  model.A = VectorXd(d);
  for (int i = 0; i < d; ++i) model.A[i] = setup.uniform(0.5, 1.5);

  const KernelSpec kernel =
      make_kernel(family, median_heuristic_bandwidth(data.X), d);
  const Intervention phi = Intervention::identity();

  TimingReport report;
  report.repeats = repeats;

  using clock = std::chrono::steady_clock;
  auto time_ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  // untimed warmup
  (void)skds_grad(model, phi, kernel, data, Estimator::linear_pairs);
  KdsGradResult kd = kds_grad(model, phi, kernel, data,
                              Estimator::linear_pairs);
  report.kds_gradient_analytic = kd.analytic;

  std::vector<double> skds_ms(repeats), kds_ms(repeats);
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    const LossGrad sg =
        skds_grad(model, phi, kernel, data, Estimator::linear_pairs);
    const auto t1 = clock::now();
    kd = kds_grad(model, phi, kernel, data, Estimator::linear_pairs);
    const auto t2 = clock::now();
    skds_ms[r] = time_ms(t0, t1);
    kds_ms[r] = time_ms(t1, t2);
    report.skds_loss = sg.loss;
    report.kds_loss = kd.loss;
  }
  set_worker_override(-1);

  auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1))
                      : 0.0;
  };
  mean_sd(skds_ms, report.skds_ms_mean, report.skds_ms_sd);
  mean_sd(kds_ms, report.kds_ms_mean, report.kds_ms_sd);
  report.speedup = report.kds_ms_mean / report.skds_ms_mean;
  return report;
}

}  // namespace stadion
