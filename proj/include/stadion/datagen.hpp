#pragma once

#include "stadion/models.hpp"

namespace stadion {

// Directed graph on d nodes; adj(i, j) = 1 means edge i -> j, no self-loops.
struct Graph {
  int d = 0;
  Eigen::MatrixXi adj;

  long edge_count() const { return adj.cast<long>().sum(); }
};

// Each ordered pair (i, j), i != j, gets an edge independently with
// p = expected_degree / (2 (d - 1)), so the expected total (in + out) degree
// per node equals expected_degree.
Graph sample_er_graph(int d, double expected_degree, std::uint64_t seed);

// Preferential attachment with 2 undirected links per incoming node (drawn
// with replacement and deduplicated, seeded from a connected pair), each
// edge oriented by an independent fair coin.
Graph sample_sf_graph(int d, std::uint64_t seed);

struct LinearSdeSystem {
  MatrixXd M;        // Hurwitz by construction (strict diagonal dominance)
  VectorXd D_diag;   // diagonal diffusion entries
  VectorXd mean;
};

// Edge i -> j sets M(j, i); weights uniform on +-[0.25, 1.0]; the diagonal
// is -(1 + sum |row|) so every Gershgorin disc stays in the open left
// half-plane.
LinearSdeSystem gen_linear_sde_system(const Graph& graph, std::uint64_t seed);

struct LinearScmSystem {
  MatrixXd W;
  VectorXd noise_scale;
  double spectral_radius = 0.0;   // power-iteration estimate after rescaling
};

// Edge weights uniform on +-[0.25, 1.0], rescaled so the spectral radius of
// W is <= 0.8 (power-iteration estimate, 200 iterations).
LinearScmSystem gen_linear_scm_system(const Graph& graph, std::uint64_t seed);

// Draws rows x = (I - W)^{-1} (eps + shift) with eps ~ N(0, diag(scale^2)).
Dataset scm_sample(const MatrixXd& W, const VectorXd& noise_scale,
                   const VectorXd& shift, long n, std::uint64_t seed);

struct EnvSpec {
  int target = -1;
  double shift = 0.0;        // pre-standardization drift/noise shift
  Intervention intervention; // identity for the observational environment
};

enum class SystemKind { sde, scm };
enum class GraphKind { er, sf };

struct BenchmarkConfig {
  SystemKind kind = SystemKind::sde;
  GraphKind graph = GraphKind::er;
  int d = 5;
  long n_per_env = 1000;
  int n_train_env = 3;
  int n_test_env = 2;
  double shift_magnitude = 2.0;
  double expected_degree = 3.0;
  std::uint64_t seed = 0;
};

struct BenchmarkBundle {
  BenchmarkConfig config;
  Graph graph;
  // exactly one of the two systems is populated, per config.kind
  LinearSdeSystem sde;
  LinearScmSystem scm;
  Dataset observational;
  std::vector<EnvSpec> train_specs;
  std::vector<Dataset> train_envs;
  std::vector<EnvSpec> test_specs;
  std::vector<Dataset> test_envs;
  VectorXd standard_mean, standard_std;   // observational constants
};

// Ground truth, observational and interventional data, disjoint train/test
// targets, everything standardized by the observational mean/std.
BenchmarkBundle make_benchmark(const BenchmarkConfig& config);

// Column mean/std (population) of the rows.
void column_moments(const MatrixXd& X, VectorXd& mean, VectorXd& stdev);

}  // namespace stadion
