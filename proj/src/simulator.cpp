#include "stadion/simulator.hpp"

#include <cmath>
#include <string>

namespace stadion {

void SimConfig::validate() const {
  require(std::isfinite(dt) && dt > 0.0, ErrorCode::invalid_input,
          "dt must be positive");
  require(burn_in_steps >= 0 && thinning >= 1 && n_samples >= 1,
          ErrorCode::invalid_input, "invalid simulation counts");
  require(divergence_threshold > 0.0, ErrorCode::invalid_input,
          "divergence threshold must be positive");
  require(chains >= 1, ErrorCode::invalid_input, "chains must be >= 1");
}

namespace {

// Diagonal fast path: every diffusion in this library is diagonal except the
// basis_cone mode with constant-vector fields.
bool is_diagonal(const MatrixXd& a) {
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < a.cols(); ++j) {
      if (i != j && a(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

MatrixXd psd_sqrt(const MatrixXd& S) {
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) {
    return MatrixXd(llt.matrixL());
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
  require(eig.info() == Eigen::Success, ErrorCode::not_stable,
          "eigendecomposition failed in psd_sqrt");
  VectorXd vals = eig.eigenvalues();
  const double floor = -1e-10 * std::max(1.0, vals.cwiseAbs().maxCoeff());
  for (long i = 0; i < vals.size(); ++i) {
    require(vals[i] >= floor, ErrorCode::not_stable,
            "matrix is not positive semidefinite");
    vals[i] = std::sqrt(std::max(0.0, vals[i]));
  }
  return eig.eigenvectors() * vals.asDiagonal() *
         eig.eigenvectors().transpose();
}

Dataset euler_maruyama_sample(const SdeModel& model, const Intervention& phi,
                              const SimConfig& cfg) {
  cfg.validate();
  phi.validate(model.d);
  const int d = model.d;
  const double sqrt_dt = std::sqrt(cfg.dt);

  Dataset out;
  out.X = MatrixXd(cfg.n_samples, d);
  out.targets = phi.targets;

  // Row quota per chain; chain c owns rows [row_start, row_start + quota).
  std::vector<long> quota(cfg.chains, cfg.n_samples / cfg.chains);
  for (long c = 0; c < cfg.n_samples % cfg.chains; ++c) quota[c] += 1;

  long row_start = 0;
  for (int chain = 0; chain < cfg.chains; ++chain) {
    const CounterRng rng(cfg.seed, 0xe61a, static_cast<std::uint64_t>(chain));
    VectorXd x = VectorXd::Zero(d);
    if (cfg.init == SimConfig::Init::gaussian) {
      for (int j = 0; j < d; ++j) {
        x[j] = cfg.init_scale *
               rng.normal(0xffff000000000000ULL + static_cast<std::uint64_t>(j));
      }
    }

    const long total_steps = cfg.burn_in_steps + quota[chain] * cfg.thinning;
    long filled = 0;
    for (long step = 0; step < total_steps; ++step) {
      const VectorXd b = drift_eval(model, x, phi);
      const MatrixXd a = diffusion_a_eval(model, x, phi);
      VectorXd noise(d);
      const std::uint64_t base = static_cast<std::uint64_t>(step) *
                                 static_cast<std::uint64_t>(d);
      for (int j = 0; j < d; ++j) {
        noise[j] = rng.normal(base + static_cast<std::uint64_t>(j));
      }
      if (is_diagonal(a)) {
        for (int j = 0; j < d; ++j) {
          x[j] += b[j] * cfg.dt + std::sqrt(a(j, j)) * sqrt_dt * noise[j];
        }
      } else {
        x += b * cfg.dt + psd_sqrt(a) * (sqrt_dt * noise);
      }
      if (!(x.cwiseAbs().maxCoeff() <= cfg.divergence_threshold)) {
        fail(ErrorCode::diverged,
             "simulation diverged at step " + std::to_string(step) +
                 " of chain " + std::to_string(chain));
      }
      if (step >= cfg.burn_in_steps &&
          (step - cfg.burn_in_steps + 1) % cfg.thinning == 0) {
        out.X.row(row_start + filled) = x.transpose();
        ++filled;
      }
    }
    row_start += quota[chain];
  }
  return out;
}

MatrixXd lyapunov_solve(const MatrixXd& M, const MatrixXd& Q) {
  const long d = M.rows();
  require(M.cols() == d && Q.rows() == d && Q.cols() == d,
          ErrorCode::invalid_input, "lyapunov_solve needs square d x d inputs");
  require(d >= 1 && d <= 64, ErrorCode::invalid_input,
          "lyapunov_solve supports 1 <= d <= 64");
  require(M.allFinite() && Q.allFinite(), ErrorCode::invalid_input,
          "lyapunov_solve inputs must be finite");

  // vec(M S + S M^T) = (I (x) M + M (x) I) vec(S), column-major vec.
  const long dd = d * d;
  MatrixXd K = MatrixXd::Zero(dd, dd);
  for (long c = 0; c < d; ++c) {
    K.block(c * d, c * d, d, d) += M;
  }
  for (long c = 0; c < d; ++c) {
    for (long r = 0; r < d; ++r) {
      for (long i = 0; i < d; ++i) {
        K(r + i * d, r + c * d) += M(i, c);
      }
    }
  }
  VectorXd rhs(dd);
  for (long c = 0; c < d; ++c) rhs.segment(c * d, d) = -Q.col(c);

  Eigen::PartialPivLU<MatrixXd> lu(K);
  const VectorXd sol = lu.solve(rhs);
  require(sol.allFinite(), ErrorCode::not_stable,
          "Lyapunov system is singular");

  MatrixXd S(d, d);
  for (long c = 0; c < d; ++c) S.col(c) = sol.segment(c * d, d);
  S = 0.5 * (S + S.transpose()).eval();

  const double qn = Q.norm();
  const double resid = (M * S + S * M.transpose() + Q).norm();
  require(resid <= 1e-8 * std::max(qn, 1e-300), ErrorCode::not_stable,
          "Lyapunov residual too large; drift matrix is likely not stable");
  return S;
}

Dataset ou_exact_sample(const MatrixXd& M, const VectorXd& mean,
                        const MatrixXd& Q, long n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_input, "need n >= 1 samples");
  const long d = M.rows();
  require(mean.size() == d, ErrorCode::invalid_input, "mean length mismatch");
  const MatrixXd S = lyapunov_solve(M, Q);
  const MatrixXd L = psd_sqrt(S);

  Dataset out;
  out.X = MatrixXd(n, d);
  const CounterRng rng(seed, 0x09ae);
  VectorXd z(d);
  for (long i = 0; i < n; ++i) {
    const std::uint64_t base =
        static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(d);
    for (long j = 0; j < d; ++j) {
      z[j] = rng.normal(base + static_cast<std::uint64_t>(j));
    }
    out.X.row(i) = (mean + L * z).transpose();
  }
  return out;
}

}  // namespace stadion
