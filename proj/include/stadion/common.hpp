#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stadion {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ErrorCode {
  invalid_input,
  insufficient_data,
  diverged,
  not_stable,
  near_singular,
  no_convergence,
  unsupported_kernel,
  non_finite_loss,
  non_positive_value,
  io_error,
  config_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

void require(bool condition, ErrorCode code, const std::string& message);

// An N x d sample matrix standing in for a target distribution, with
// provenance metadata.
struct Dataset {
  MatrixXd X;                  // one sample per row
  int env_index = 0;
  std::vector<int> targets;    // intervention targets, empty = observational

  long rows() const { return static_cast<long>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }
};

// --- Deterministic random numbers -----------------------------------------
//
// All randomness in the library flows through these two generators. Both are
// built on the SplitMix64 finalizer, so results are identical across
// platforms and standard libraries (std::*_distribution is not portable).

std::uint64_t mix64(std::uint64_t z);

// Stateless counter-based stream: value = f(key, counter). Used where draws
// must not depend on scheduling, e.g. per-(chain, step) noise.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_a = 0,
             std::uint64_t stream_b = 0);

  double uniform01(std::uint64_t counter) const;          // in (0, 1)
  double normal(std::uint64_t counter) const;             // N(0, 1)

 private:
  std::uint64_t bits(std::uint64_t counter) const;
  std::uint64_t key_;
};

// Sequential generator (SplitMix64) for setup-style sampling: graphs,
// weights, shuffles. Deterministic given the seed.
class SeqRng {
 public:
  explicit SeqRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_bits();
  double uniform01();                        // in (0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::int64_t uniform_int(std::int64_t n);  // in [0, n)
  bool bernoulli(double p);

  // Fisher-Yates permutation of [0, n).
  std::vector<int> permutation(int n);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Worker-count cap shared by all parallel loops. Resolves the
// STADION_THREADS environment variable: unset -> 1, "0" -> hardware
// concurrency, k -> k. Can be overridden programmatically (used by the
// timing benchmark to pin single-threaded execution).
int worker_count();
void set_worker_override(int n);   // -1 restores environment resolution

bool all_finite(const VectorXd& v);
bool all_finite(const MatrixXd& m);

}  // namespace stadion
