#include "stadion/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace stadion {

void TrainConfig::validate() const {
  require(steps >= 0, ErrorCode::invalid_input, "steps must be >= 0");
  require(batch_size >= 2, ErrorCode::invalid_input, "batch_size must be >= 2");
  require(lr > 0.0 && std::isfinite(lr), ErrorCode::invalid_input,
          "learning rate must be positive");
  require(lambda_sparsity >= 0.0, ErrorCode::invalid_input,
          "lambda must be >= 0");
}

namespace {

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct AdamState {
  VectorXd m, v;
  long t = 0;

  explicit AdamState(long size)
      : m(VectorXd::Zero(size)), v(VectorXd::Zero(size)) {}

  void update(VectorXd& params, const VectorXd& grad, const TrainConfig& cfg) {
    ++t;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
    v = cfg.adam_beta2 * v.array().matrix() +
        (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
    const double mc = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double vc = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    params -= (cfg.lr * (m / mc).array() /
               ((v / vc).array().sqrt() + cfg.adam_eps))
                  .matrix();
  }
};

// Per-environment epoch of indices, drawn without replacement.
struct BatchQueue {
  std::vector<int> order;
  long cursor = 0;

  void refill(long n, SeqRng& rng) {
    order = rng.permutation(static_cast<int>(n));
    cursor = 0;
  }
};

}  // namespace

RegResult regularizer(const SdeModel& model,
                      const std::vector<Intervention>& phis) {
  RegResult out;
  out.model_grad = zero_grad(model, Intervention::identity());

  if (model.kind == DriftKind::linear) {
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (model.fixed_mask(j, q)) continue;
        const auto support = model.basis.entries[q].support();
        const bool cross = std::any_of(support.begin(), support.end(),
                                       [&](int var) { return var != j; });
        if (!cross) continue;
        out.value += std::abs(model.B(j, q));
        out.model_grad.dB(j, q) = sign_or_zero(model.B(j, q));
      }
    }
  } else {
    // Group-L2 over the input columns of each coordinate MLP.
    for (int j = 0; j < model.d; ++j) {
      const MlpCoord& c = model.coords[j];
      MlpCoord& g = out.model_grad.dmlp[j];
      for (int p = 0; p < model.d; ++p) {
        if (p == j) continue;
        const double norm = c.U.col(p).norm();
        out.value += norm;
        if (norm > 0.0) g.U.col(p) = c.U.col(p) / norm;
      }
    }
  }

  for (const Intervention& phi : phis) {
    const long k = static_cast<long>(phi.targets.size());
    VectorXd grad = VectorXd::Zero(2 * k);
    for (long t = 0; t < k; ++t) {
      out.value += std::abs(phi.shift[t]);
      grad[t] = sign_or_zero(phi.shift[t]);
    }
    out.phi_grads.push_back(std::move(grad));
  }
  return out;
}

FitResult train(const std::vector<TrainEnv>& envs, const SdeModel& init,
                const TrainConfig& cfg) {
  cfg.validate();
  require(!envs.empty(), ErrorCode::insufficient_data,
          "training needs at least one environment");
  require(envs[0].targets.empty(), ErrorCode::invalid_input,
          "environment 0 must be observational (no targets)");
  for (const TrainEnv& env : envs) {
    require(env.data.rows() >= 2, ErrorCode::insufficient_data,
            "every environment needs at least 2 samples");
    require(env.data.dim() == init.d, ErrorCode::invalid_input,
            "environment dimension does not match the model");
  }

  const auto t_start = std::chrono::steady_clock::now();
  const int n_envs = static_cast<int>(envs.size());

  FitResult fit;
  fit.model = init;
  for (const TrainEnv& env : envs) {
    Intervention phi;
    phi.targets = env.targets;
    phi.shift = VectorXd::Zero(static_cast<long>(env.targets.size()));
    phi.log_scale = VectorXd::Zero(static_cast<long>(env.targets.size()));
    fit.phis.push_back(std::move(phi));
  }

  VectorXd theta = pack_theta(fit.model);
  AdamState theta_state(theta.size());
  std::vector<VectorXd> phi_params;
  std::vector<AdamState> phi_states;
  for (const Intervention& phi : fit.phis) {
    phi_params.push_back(pack_phi(phi));
    phi_states.emplace_back(phi_params.back().size());
  }

  SeqRng rng(mix64(cfg.seed) ^ 0x7247ULL);
  std::vector<BatchQueue> queues(n_envs);

  fit.loss_trace.reserve(cfg.steps);
  for (long step = 0; step < cfg.steps; ++step) {
    const int env = static_cast<int>(rng.uniform_int(n_envs));
    const Dataset& full = envs[env].data;

    Dataset batch;
    batch.targets = envs[env].targets;
    if (full.rows() <= cfg.batch_size) {
      batch.X = full.X;
    } else {
      BatchQueue& queue = queues[env];
      if (queue.order.empty() ||
          queue.cursor + cfg.batch_size > static_cast<long>(queue.order.size())) {
        queue.refill(full.rows(), rng);
      }
      batch.X = MatrixXd(cfg.batch_size, full.dim());
      for (long r = 0; r < cfg.batch_size; ++r) {
        batch.X.row(r) = full.X.row(queue.order[queue.cursor + r]);
      }
      queue.cursor += cfg.batch_size;
    }
    if (cfg.shuffle_pairs) {
      const std::vector<int> perm =
          rng.permutation(static_cast<int>(batch.X.rows()));
      MatrixXd shuffled(batch.X.rows(), batch.X.cols());
      for (long r = 0; r < batch.X.rows(); ++r) {
        shuffled.row(r) = batch.X.row(perm[r]);
      }
      batch.X = std::move(shuffled);
    }

    const LossGrad lg =
        skds_grad(fit.model, fit.phis[env], cfg.kernel, batch, cfg.estimator);
    const RegResult reg = regularizer(fit.model, fit.phis);
    const double objective = lg.loss + cfg.lambda_sparsity * reg.value;
    if (!std::isfinite(objective)) {
      fail(ErrorCode::non_finite_loss,
           "non-finite training loss at step " + std::to_string(step));
    }
    fit.loss_trace.push_back(objective);

    VectorXd g_theta = pack_theta_grad(fit.model, lg.grad) +
                       cfg.lambda_sparsity *
                           pack_theta_grad(fit.model, reg.model_grad);
    VectorXd g_phi = pack_phi_grad(fit.phis[env], lg.grad) +
                     cfg.lambda_sparsity * reg.phi_grads[env];

    if (cfg.grad_clip > 0.0) {
      const double norm =
          std::sqrt(g_theta.squaredNorm() + g_phi.squaredNorm());
      if (norm > cfg.grad_clip) {
        const double scale = cfg.grad_clip / norm;
        g_theta *= scale;
        g_phi *= scale;
      }
    }

    theta_state.update(theta, g_theta, cfg);
    unpack_theta(fit.model, theta);
    if (fit.model.diffusion_mode == DiffusionMode::basis_cone) {
      fit.model.A = fit.model.A.cwiseMax(0.0);   // stay in the cone
      theta = pack_theta(fit.model);
    }
    if (env != 0 && g_phi.size() > 0) {
      phi_states[env].update(phi_params[env], g_phi, cfg);
      unpack_phi(fit.phis[env], phi_params[env]);
    }
  }

  fit.wall_time_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
  return fit;
}

bool affine_stationary_mean(const SdeModel& model, const Intervention& phi,
                            VectorXd& mean_out) {
  if (model.kind != DriftKind::linear) return false;
  const int d = model.d;
  VectorXd c = VectorXd::Zero(d);
  MatrixXd W = MatrixXd::Zero(d, d);
  for (int q = 0; q < model.feature_count(); ++q) {
    const FeatureEntry& f = model.basis.entries[q];
    if (f.kind == FeatureEntry::Kind::constant) {
      c += model.B.col(q);
    } else if (f.kind == FeatureEntry::Kind::coordinate) {
      W.col(f.i) += model.B.col(q);
    } else {
      return false;   // nonlinear feature, no closed form
    }
  }
  for (size_t t = 0; t < phi.targets.size(); ++t) {
    c[phi.targets[t]] += phi.shift[t];
  }
  Eigen::FullPivLU<MatrixXd> lu(W);
  if (!lu.isInvertible()) return false;
  mean_out = lu.solve(-c);
  return true;
}

Intervention calibrate_test_intervention(const SdeModel& model, int target,
                                         double desired_mean,
                                         const CalibrationConfig& cfg) {
  require(target >= 0 && target < model.d, ErrorCode::invalid_input,
          "calibration target out of range");
  require(std::isfinite(desired_mean), ErrorCode::invalid_input,
          "desired mean must be finite");

  if (cfg.prefer_closed_form) {
    // delta enters the stationary mean linearly for affine drift, so two
    // solves determine it exactly.
    VectorXd mean0, mean1;
    const bool ok0 = affine_stationary_mean(
        model, Intervention::shift_on(target, 0.0), mean0);
    const bool ok1 = ok0 && affine_stationary_mean(
                                model, Intervention::shift_on(target, 1.0),
                                mean1);
    if (ok0 && ok1) {
      const double slope = mean1[target] - mean0[target];
      if (std::abs(slope) > 1e-12) {
        const double delta = (desired_mean - mean0[target]) / slope;
        return Intervention::shift_on(target, delta);
      }
    }
  }

  // Secant on the simulated stationary mean. The same seed is reused for
  // every evaluation so the iteration sees a smooth deterministic response.
  auto simulated_gap = [&](double delta) {
    SimConfig sim = cfg.sim;
    const Dataset rollout =
        euler_maruyama_sample(model, Intervention::shift_on(target, delta), sim);
    return rollout.X.col(target).mean() - desired_mean;
  };

  double d0 = 0.0;
  double f0 = simulated_gap(d0);
  if (std::abs(f0) <= cfg.tolerance) return Intervention::shift_on(target, d0);
  double d1 = -f0;   // unit-response first guess
  double f1 = simulated_gap(d1);

  double best_delta = std::abs(f0) < std::abs(f1) ? d0 : d1;
  double best_gap = std::min(std::abs(f0), std::abs(f1));
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (std::abs(f1) <= cfg.tolerance) return Intervention::shift_on(target, d1);
    const double denom = f1 - f0;
    double d2 = std::abs(denom) > 1e-300 ? d1 - f1 * (d1 - d0) / denom
                                         : d1 + 0.5 * (d1 - d0);
    if (!std::isfinite(d2)) d2 = 0.5 * (d0 + d1);
    d0 = d1;
    f0 = f1;
    d1 = d2;
    f1 = simulated_gap(d1);
    if (std::abs(f1) < best_gap) {
      best_gap = std::abs(f1);
      best_delta = d1;
    }
  }
  if (best_gap <= cfg.tolerance) {
    return Intervention::shift_on(target, best_delta);
  }
  fail(ErrorCode::no_convergence,
       "calibration did not reach tolerance; best delta " +
           std::to_string(best_delta) + " leaves residual " +
           std::to_string(best_gap));
}

}  // namespace stadion
