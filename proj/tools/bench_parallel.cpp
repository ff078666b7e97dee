// Compares the serial reference execution of the pairwise kernels against
// the OpenMP path on the same inputs, checking that the fixed block
// combination keeps results bitwise identical while the wall clock drops.

#include "stadion/discrepancy.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace stadion;

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  long n = 20000;
  int d = 10;
  int repeats = 5;
  int threads = 0;   // 0: hardware concurrency
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    const long value = std::strtol(argv[i + 1], nullptr, 10);
    if (key == "--n") n = value;
    if (key == "--d") d = static_cast<int>(value);
    if (key == "--repeats") repeats = static_cast<int>(value);
    if (key == "--threads") threads = static_cast<int>(value);
  }
  if (threads == 0) {
#ifdef _OPENMP
    threads = omp_get_max_threads();
#else
    threads = 1;
#endif
  }

  Dataset data;
  data.X = MatrixXd(n, d);
  const CounterRng rng(2024, 0xbe27ULL);
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
  SeqRng setup(7);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= d; ++j) model.B(i, j) = setup.normal() * 0.3;
  }
  model.fixed_mask = MaskXb::Constant(d, d + 1, false);
  model.diffusion_mode = DiffusionMode::basis_cone;
  model.dbasis = DiffusionBasis::coordinates(d);
  model.A = VectorXd::Ones(d);

  const KernelSpec kernel =
      make_kernel(KernelFamily::rbf, median_heuristic_bandwidth(data.X), d);
  const Intervention none = Intervention::identity();

  std::printf("pairwise losses on n=%ld samples, d=%d (u-statistic pairs: %ld)\n",
              n, d, n / 2);
  std::printf("%-22s %12s %12s %9s %9s\n", "kernel", "serial ms",
              "parallel ms", "speedup", "bitwise");

  double loss_serial = 0.0, loss_parallel = 0.0;
  set_worker_override(1);
  const double t_loss_1 = time_ms(
      [&] {
        loss_serial = skds_empirical(model, none, kernel, data,
                                     Estimator::linear_pairs);
      },
      repeats);
  set_worker_override(threads);
  const double t_loss_p = time_ms(
      [&] {
        loss_parallel = skds_empirical(model, none, kernel, data,
                                       Estimator::linear_pairs);
      },
      repeats);
  std::printf("%-22s %12.2f %12.2f %8.2fx %9s\n", "skds_empirical", t_loss_1,
              t_loss_p, t_loss_1 / t_loss_p,
              loss_serial == loss_parallel ? "yes" : "NO");

  VectorXd grad_serial, grad_parallel;
  set_worker_override(1);
  const double t_grad_1 = time_ms(
      [&] {
        grad_serial = pack_theta_grad(
            model,
            skds_grad(model, none, kernel, data, Estimator::linear_pairs)
                .grad);
      },
      repeats);
  set_worker_override(threads);
  const double t_grad_p = time_ms(
      [&] {
        grad_parallel = pack_theta_grad(
            model,
            skds_grad(model, none, kernel, data, Estimator::linear_pairs)
                .grad);
      },
      repeats);
  std::printf("%-22s %12.2f %12.2f %8.2fx %9s\n", "skds_grad", t_grad_1,
              t_grad_p, t_grad_1 / t_grad_p,
              (grad_serial - grad_parallel).cwiseAbs().maxCoeff() == 0.0
                  ? "yes"
                  : "NO");

  MatrixXd r_serial, r_parallel;
  set_worker_override(1);
  const double t_r_1 = time_ms(
      [&] {
        r_serial = build_R_hat(model.basis, model.dbasis, kernel, data,
                               Estimator::linear_pairs)
                       .R_hat;
      },
      repeats);
  set_worker_override(threads);
  const double t_r_p = time_ms(
      [&] {
        r_parallel = build_R_hat(model.basis, model.dbasis, kernel, data,
                                 Estimator::linear_pairs)
                         .R_hat;
      },
      repeats);
  set_worker_override(-1);
  std::printf("%-22s %12.2f %12.2f %8.2fx %9s\n", "build_R_hat", t_r_1, t_r_p,
              t_r_1 / t_r_p,
              (r_serial - r_parallel).cwiseAbs().maxCoeff() == 0.0 ? "yes"
                                                                   : "NO");

  const bool all_bitwise = loss_serial == loss_parallel &&
                           (grad_serial - grad_parallel).cwiseAbs().maxCoeff() ==
                               0.0 &&
                           (r_serial - r_parallel).cwiseAbs().maxCoeff() == 0.0;
  std::printf("threads=%d  bitwise-identical results: %s\n", threads,
              all_bitwise ? "yes" : "NO");
  return all_bitwise ? 0 : 1;
}
