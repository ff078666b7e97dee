#include "stadion/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace stadion {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "InvalidInput";
    case ErrorCode::insufficient_data: return "InsufficientData";
    case ErrorCode::diverged: return "Diverged";
    case ErrorCode::not_stable: return "NotStable";
    case ErrorCode::near_singular: return "NearSingular";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::unsupported_kernel: return "UnsupportedKernel";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::non_positive_value: return "NonPositiveValue";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::config_error: return "ConfigError";
  }
  return "UnknownError";
}

void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double bits_to_unit(std::uint64_t bits) {
  // 53 mantissa bits; +0.5 ulp keeps the value strictly inside (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream_a,
                       std::uint64_t stream_b) {
  key_ = mix64(mix64(seed) ^ mix64(stream_a * 0x9e3779b97f4a7c15ULL + 1) ^
               mix64(stream_b * 0xd1342543de82ef95ULL + 2));
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix64(key_ ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

double CounterRng::uniform01(std::uint64_t counter) const {
  return bits_to_unit(bits(counter));
}

double CounterRng::normal(std::uint64_t counter) const {
  // Box-Muller from two substream draws keyed by the same counter.
  const double u1 = bits_to_unit(mix64(bits(counter)));
  const double u2 = bits_to_unit(mix64(bits(counter) + 0x9e3779b97f4a7c15ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t SeqRng::next_bits() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SeqRng::uniform01() { return bits_to_unit(next_bits()); }

double SeqRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double SeqRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

std::int64_t SeqRng::uniform_int(std::int64_t n) {
  require(n > 0, ErrorCode::invalid_input, "uniform_int needs n > 0");
  // Lemire's multiply-shift with rejection, bias-free.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  while (true) {
    const std::uint64_t x = next_bits();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
    const std::uint64_t lo = static_cast<std::uint64_t>(m);
    if (lo >= range || lo >= (-range) % range) {
      return static_cast<std::int64_t>(m >> 64);
    }
  }
}

bool SeqRng::bernoulli(double p) { return uniform01() < p; }

std::vector<int> SeqRng::permutation(int n) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform_int(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

namespace {
std::atomic<int> worker_override{-1};
}

int worker_count() {
  const int forced = worker_override.load();
  if (forced >= 1) return forced;
  const char* env = std::getenv("STADION_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const long parsed = std::strtol(env, nullptr, 10);
  if (parsed == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
  return parsed < 1 ? 1 : static_cast<int>(parsed);
}

void set_worker_override(int n) { worker_override.store(n); }

bool all_finite(const VectorXd& v) { return v.allFinite(); }
bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace stadion
