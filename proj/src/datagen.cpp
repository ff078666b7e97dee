#include "stadion/datagen.hpp"

#include "stadion/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace stadion {

Graph sample_er_graph(int d, double expected_degree, std::uint64_t seed) {
  require(d >= 2, ErrorCode::invalid_input, "er graph needs d >= 2");
  require(expected_degree >= 0.0 && expected_degree < d,
          ErrorCode::invalid_input, "expected_degree must be in [0, d)");
  const double p = expected_degree / (2.0 * (d - 1));
  SeqRng rng(mix64(seed) ^ 0xe2ULL);
  Graph g;
  g.d = d;
  g.adj = Eigen::MatrixXi::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j && rng.bernoulli(p)) g.adj(i, j) = 1;
    }
  }
  return g;
}

Graph sample_sf_graph(int d, std::uint64_t seed) {
  require(d >= 3, ErrorCode::invalid_input, "sf graph needs d >= 3");
  SeqRng rng(mix64(seed) ^ 0x5fULL);
  // Undirected preferential attachment, then random orientation.
  std::vector<std::pair<int, int>> edges = {{0, 1}};
  std::vector<int> degree(d, 0);
  degree[0] = degree[1] = 1;
  int total_degree = 2;
  for (int node = 2; node < d; ++node) {
    int picks[2];
    for (int k = 0; k < 2; ++k) {
      std::int64_t roll = rng.uniform_int(total_degree);
      int target = 0;
      while (roll >= degree[target]) {
        roll -= degree[target];
        ++target;
      }
      picks[k] = target;
    }
    const int n_links = picks[0] == picks[1] ? 1 : 2;
    for (int k = 0; k < n_links; ++k) {
      edges.push_back({node, picks[k]});
      degree[node] += 1;
      degree[picks[k]] += 1;
      total_degree += 2;
    }
  }
  Graph g;
  g.d = d;
  g.adj = Eigen::MatrixXi::Zero(d, d);
  for (const auto& [u, v] : edges) {
    if (rng.bernoulli(0.5)) {
      g.adj(u, v) = 1;
    } else {
      g.adj(v, u) = 1;
    }
  }
  return g;
}

LinearSdeSystem gen_linear_sde_system(const Graph& graph,
                                      std::uint64_t seed) {
  const int d = graph.d;
  SeqRng rng(mix64(seed) ^ 0x5deULL);
  LinearSdeSystem sys;
  sys.M = MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (graph.adj(i, j) == 1) {
        const double w = rng.uniform(0.25, 1.0);
        sys.M(j, i) = rng.bernoulli(0.5) ? w : -w;
      }
    }
  }
  for (int j = 0; j < d; ++j) {
    double row_abs = 0.0;
    for (int i = 0; i < d; ++i) {
      if (i != j) row_abs += std::abs(sys.M(j, i));
    }
    sys.M(j, j) = -(1.0 + row_abs);
  }
  sys.D_diag = VectorXd(d);
  sys.mean = VectorXd(d);
  for (int j = 0; j < d; ++j) sys.D_diag[j] = rng.uniform(0.5, 1.5);
  for (int j = 0; j < d; ++j) sys.mean[j] = rng.uniform(-2.0, 2.0);
  return sys;
}

namespace {

// |lambda_max| estimate by normalized power iteration; the growth factor of
// the final iterations is averaged to smooth oscillation from complex pairs.
double spectral_radius_estimate(const MatrixXd& W, std::uint64_t seed,
                                int iterations = 200) {
  const long d = W.rows();
  if (W.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  SeqRng rng(mix64(seed) ^ 0x407fULL);
  VectorXd v(d);
  for (long i = 0; i < d; ++i) v[i] = rng.normal();
  v.normalize();
  double growth = 0.0;
  int counted = 0;
  for (int it = 0; it < iterations; ++it) {
    VectorXd w = W * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    if (it >= iterations - 50) {
      growth += norm;
      ++counted;
    }
    v = w / norm;
  }
  return growth / counted;
}

}  // namespace

LinearScmSystem gen_linear_scm_system(const Graph& graph,
                                      std::uint64_t seed) {
  const int d = graph.d;
  SeqRng rng(mix64(seed) ^ 0x5c3ULL);
  LinearScmSystem sys;
  sys.W = MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (graph.adj(i, j) == 1) {
        const double w = rng.uniform(0.25, 1.0);
        sys.W(j, i) = rng.bernoulli(0.5) ? w : -w;
      }
    }
  }
  const double radius = spectral_radius_estimate(sys.W, seed);
  if (radius > 0.8) {
    sys.W *= 0.8 / radius;
  }
  sys.spectral_radius = spectral_radius_estimate(sys.W, seed);
  sys.noise_scale = VectorXd(d);
  for (int j = 0; j < d; ++j) sys.noise_scale[j] = rng.uniform(0.5, 1.5);
  return sys;
}

Dataset scm_sample(const MatrixXd& W, const VectorXd& noise_scale,
                   const VectorXd& shift, long n, std::uint64_t seed) {
  const long d = W.rows();
  require(noise_scale.size() == d && shift.size() == d,
          ErrorCode::invalid_input, "scm_sample shape mismatch");
  require(n >= 1, ErrorCode::invalid_input, "need n >= 1");

  const MatrixXd A = MatrixXd::Identity(d, d) - W;
  Eigen::PartialPivLU<MatrixXd> lu(A);
  const CounterRng rng(seed, 0x5c11);
  Dataset out;
  out.X = MatrixXd(n, d);
  VectorXd eps(d);
  for (long i = 0; i < n; ++i) {
    const std::uint64_t base =
        static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(d);
    for (long j = 0; j < d; ++j) {
      eps[j] = noise_scale[j] * rng.normal(base + static_cast<std::uint64_t>(j));
    }
    const VectorXd rhs = eps + shift;
    const VectorXd x = lu.solve(rhs);
    const double resid = (A * x - rhs).norm();
    require(resid <= 1e-8 * std::max(1.0, rhs.norm()),
            ErrorCode::near_singular, "(I - W) solve residual too large");
    out.X.row(i) = x.transpose();
  }
  return out;
}

void column_moments(const MatrixXd& X, VectorXd& mean, VectorXd& stdev) {
  const long n = X.rows();
  mean = X.colwise().mean();
  stdev = VectorXd(X.cols());
  for (long j = 0; j < X.cols(); ++j) {
    stdev[j] = std::sqrt((X.col(j).array() - mean[j]).square().sum() /
                         static_cast<double>(n));
  }
}

namespace {

void standardize_rows(MatrixXd& X, const VectorXd& mean,
                      const VectorXd& stdev) {
  for (long j = 0; j < X.cols(); ++j) {
    X.col(j) = (X.col(j).array() - mean[j]) / stdev[j];
  }
}

}  // namespace

BenchmarkBundle make_benchmark(const BenchmarkConfig& config) {
  require(config.d >= 2, ErrorCode::invalid_input, "need d >= 2");
  require(config.n_train_env + config.n_test_env <= config.d,
          ErrorCode::invalid_input,
          "intervention target count exceeds the number of variables");
  require(config.n_per_env >= 2, ErrorCode::invalid_input,
          "need at least 2 samples per environment");

  BenchmarkBundle bundle;
  bundle.config = config;
  const std::uint64_t seed = config.seed;
  bundle.graph = config.graph == GraphKind::er
                     ? sample_er_graph(config.d, config.expected_degree, seed)
                     : sample_sf_graph(config.d, seed);

  if (config.kind == SystemKind::sde) {
    bundle.sde = gen_linear_sde_system(bundle.graph, mix64(seed) + 1);
  } else {
    bundle.scm = gen_linear_scm_system(bundle.graph, mix64(seed) + 1);
  }

  // Disjoint target variables for train and test environments.
  SeqRng rng(mix64(seed) ^ 0xbe9cbULL);
  const std::vector<int> perm = rng.permutation(config.d);
  std::vector<double> signs;
  for (int e = 0; e < config.n_train_env + config.n_test_env; ++e) {
    signs.push_back(rng.bernoulli(0.5) ? 1.0 : -1.0);
  }

  auto sample_env = [&](const VectorXd& drift_shift,
                        std::uint64_t env_seed) -> Dataset {
    if (config.kind == SystemKind::sde) {
      // Additive drift shift moves the OU mean to mean - M^{-1} shift and
      // leaves the stationary covariance unchanged.
      const VectorXd mean_shift =
          -bundle.sde.M.partialPivLu().solve(drift_shift);
      MatrixXd Q = MatrixXd::Zero(config.d, config.d);
      Q.diagonal() = bundle.sde.D_diag.array().square();
      return ou_exact_sample(bundle.sde.M, bundle.sde.mean + mean_shift, Q,
                             config.n_per_env, env_seed);
    }
    return scm_sample(bundle.scm.W, bundle.scm.noise_scale, drift_shift,
                      config.n_per_env, env_seed);
  };

  bundle.observational = sample_env(VectorXd::Zero(config.d), mix64(seed) + 2);
  bundle.observational.env_index = 0;

  column_moments(bundle.observational.X, bundle.standard_mean,
                 bundle.standard_std);
  for (long j = 0; j < bundle.standard_std.size(); ++j) {
    require(bundle.standard_std[j] > 0.0, ErrorCode::invalid_input,
            "degenerate observational column");
  }
  standardize_rows(bundle.observational.X, bundle.standard_mean,
                   bundle.standard_std);

  for (int e = 0; e < config.n_train_env + config.n_test_env; ++e) {
    EnvSpec spec;
    spec.target = perm[e];
    spec.shift = signs[e] * config.shift_magnitude;
    spec.intervention = Intervention::shift_on(spec.target, spec.shift);
    VectorXd drift_shift = VectorXd::Zero(config.d);
    drift_shift[spec.target] = spec.shift;

    Dataset env = sample_env(drift_shift, mix64(seed) + 3 + e);
    env.env_index = e + 1;
    env.targets = {spec.target};
    standardize_rows(env.X, bundle.standard_mean, bundle.standard_std);

    if (e < config.n_train_env) {
      bundle.train_specs.push_back(spec);
      bundle.train_envs.push_back(std::move(env));
    } else {
      bundle.test_specs.push_back(spec);
      bundle.test_envs.push_back(std::move(env));
    }
  }
  return bundle;
}

}  // namespace stadion
