#include "stadion/discrepancy.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace stadion;
using oracles::close_rel;

namespace {

SdeModel zero_model(int d) {
  SdeModel m;
  m.d = d;
  m.kind = DriftKind::linear;
  m.basis = FeatureBasis::affine(d);
  m.B = MatrixXd::Zero(d, d + 1);
  m.fixed_mask = MaskXb::Constant(d, d + 1, false);
  m.diffusion_mode = DiffusionMode::basis_cone;   // empty cone: a == 0
  return m;
}

// b(x) = -4 (x - 1), a = 4, the running one-dimensional example.
SdeModel example_model() {
  SdeModel m = zero_model(1);
  m.B(0, 0) = 4.0;
  m.B(0, 1) = -4.0;
  m.diffusion_mode = DiffusionMode::diag_exp;
  m.s = VectorXd::Constant(1, std::log(2.0));
  return m;
}

Dataset gaussian_data(long n, double mean, double stdev, std::uint64_t seed) {
  Dataset data;
  data.X = MatrixXd(n, 1);
  const CounterRng rng(seed, 0xda7aULL);
  for (long i = 0; i < n; ++i) {
    data.X(i, 0) = mean + stdev * rng.normal(static_cast<std::uint64_t>(i));
  }
  return data;
}

Dataset rows_gaussian(long n, int d, SeqRng& rng) {
  Dataset data;
  data.X = MatrixXd(n, d);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) data.X(i, j) = rng.normal();
  }
  return data;
}

const Intervention kNone = Intervention::identity();

}  // namespace

TEST_CASE("skds pair pinned values") {
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.5, 1);

  const SdeModel zeros = zero_model(1);
  const PairTerm z = skds_pair(zeros, kNone, kernel,
                               VectorXd::Constant(1, 0.3),
                               VectorXd::Constant(1, -0.7));
  CHECK(z.value == 0.0);
  CHECK(z.d_bx.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.d_ax.cwiseAbs().maxCoeff() == 0.0);

  // b vanishes at x = y = 1, leaving tr(a a ch) = 4 * 4 * (1 / 0.25)
  const SdeModel m = example_model();
  const PairTerm p = skds_pair(m, kNone, kernel, VectorXd::Constant(1, 1.0),
                               VectorXd::Constant(1, 1.0));
  CHECK(p.value == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("skds pair is symmetric in its arguments") {
  SeqRng rng(101);
  for (int rep = 0; rep < 40; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const SdeModel m = oracles::random_linear_model(d, rng);
    const KernelSpec kernel =
        make_kernel(rep % 2 == 0 ? KernelFamily::rbf : KernelFamily::tilted_rbf,
                    0.9, d);
    const VectorXd x = oracles::random_vector(d, rng);
    const VectorXd y = oracles::random_vector(d, rng);
    const double vxy = skds_pair(m, kNone, kernel, x, y).value;
    const double vyx = skds_pair(m, kNone, kernel, y, x).value;
    CHECK(std::abs(vxy - vyx) <= 1e-12 * std::abs(vxy));
  }
}

TEST_CASE("skds pair matches the nested operator oracle") {
  SeqRng rng(103);
  for (int rep = 0; rep < 15; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const SdeModel m = oracles::random_linear_model(d, rng);
    const KernelFamily family =
        rep % 3 == 0 ? KernelFamily::rbf
                     : (rep % 3 == 1 ? KernelFamily::tilted_rbf
                                     : KernelFamily::imq_plus);
    const KernelSpec kernel = make_kernel(family, 1.0, d);
    const VectorXd x = oracles::random_vector(d, rng, 0.8);
    const VectorXd y = oracles::random_vector(d, rng, 0.8);
    const double got = skds_pair(m, kNone, kernel, x, y).value;
    const double want = oracles::skds_operator_oracle(m, kNone, kernel, x, y);
    CHECK(close_rel(got, want, 1e-4));
  }
}

TEST_CASE("skds pair cotangents match finite differences of the value") {
  SeqRng rng(107);
  const int d = 3;
  const SdeModel m = oracles::random_linear_model(d, rng);
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.8, d);
  const VectorXd x = oracles::random_vector(d, rng);
  const VectorXd y = oracles::random_vector(d, rng);
  const PairTerm term = skds_pair(m, kNone, kernel, x, y);

  const VectorXd bx = drift_eval(m, x, kNone);
  const VectorXd by = drift_eval(m, y, kNone);
  const MatrixXd ax = diffusion_a_eval(m, x, kNone);
  const MatrixXd ay = diffusion_a_eval(m, y, kNone);
  const double k = kernel_value(kernel, x, y);
  const VectorXd gx = kernel_grad_x(kernel, x, y);
  const VectorXd gy = kernel_grad_y(kernel, x, y);
  const MatrixXd ch = kernel_cross_hessian(kernel, x, y);
  auto value_of = [&](const VectorXd& vbx, const VectorXd& vby,
                      const MatrixXd& vax, const MatrixXd& vay) {
    return 4.0 * vbx.dot(vby) * k + 2.0 * vbx.dot(vay * gy) +
           2.0 * vby.dot(vax * gx) + (vax * vay).cwiseProduct(ch).sum();
  };

  const double h = 1e-6;
  for (int i = 0; i < d; ++i) {
    VectorXd bp = bx, bm = bx;
    bp[i] += h;
    bm[i] -= h;
    CHECK(close_rel(term.d_bx[i],
                    (value_of(bp, by, ax, ay) - value_of(bm, by, ax, ay)) /
                        (2.0 * h),
                    1e-5));
    for (int j = 0; j < d; ++j) {
      MatrixXd ap = ax, am = ax;
      ap(i, j) += h;
      am(i, j) -= h;
      CHECK(close_rel(term.d_ax(i, j),
                      (value_of(bx, by, ap, ay) - value_of(bx, by, am, ay)) /
                          (2.0 * h),
                      1e-5));
      MatrixXd aq = ay, ar = ay;
      aq(i, j) += h;
      ar(i, j) -= h;
      CHECK(close_rel(term.d_ay(i, j),
                      (value_of(bx, by, ax, aq) - value_of(bx, by, ax, ar)) /
                          (2.0 * h),
                      1e-5));
    }
  }
}

TEST_CASE("kds pair pinned values and oracle") {
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, 1);
  const SdeModel zeros = zero_model(1);
  CHECK(kds_pair(zeros, kNone, kernel, VectorXd::Constant(1, 0.1),
                 VectorXd::Constant(1, 0.4)) == 0.0);

  // b = 0 at x = y = 1 leaves tt / 4 = 16 * 3 / 4
  const SdeModel m = example_model();
  CHECK(kds_pair(m, kNone, kernel, VectorXd::Constant(1, 1.0),
                 VectorXd::Constant(1, 1.0)) ==
        doctest::Approx(12.0).epsilon(1e-12));

  SeqRng rng(109);
  for (int rep = 0; rep < 8; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(2));
    const SdeModel rm = oracles::random_linear_model(d, rng);
    const KernelSpec rk = make_kernel(KernelFamily::rbf, 1.0, d);
    const VectorXd x = oracles::random_vector(d, rng, 0.7);
    const VectorXd y = oracles::random_vector(d, rng, 0.7);
    const double got = kds_pair(rm, kNone, rk, x, y);
    const double want = oracles::kds_generator_oracle(rm, kNone, rk, x, y);
    CHECK(close_rel(got, want, 1e-3));
  }

  // the finite-difference fallback for a non-rbf family
  const int d = 2;
  const SdeModel rm = oracles::random_linear_model(d, rng);
  const KernelSpec tk = make_kernel(KernelFamily::tilted_rbf, 1.0, d);
  const VectorXd x = oracles::random_vector(d, rng, 0.5);
  const VectorXd y = oracles::random_vector(d, rng, 0.5);
  CHECK(close_rel(kds_pair(rm, kNone, tk, x, y),
                  oracles::kds_generator_oracle(rm, kNone, tk, x, y), 1e-3));
  CHECK_THROWS_AS(kds_pair(rm, kNone, tk, x, y, false), Error);
}

TEST_CASE("empirical estimators: trivial cases") {
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.7, 1);
  const SdeModel zeros = zero_model(1);
  SeqRng rng(113);
  Dataset data = rows_gaussian(64, 1, rng);
  CHECK(skds_empirical(zeros, kNone, kernel, data, Estimator::linear_pairs) ==
        0.0);
  CHECK(kds_empirical(zeros, kNone, kernel, data, Estimator::u_statistic) ==
        0.0);

  const SdeModel m = example_model();
  Dataset two;
  two.X = MatrixXd(2, 1);
  two.X << 0.4, 1.3;
  const double pair_value =
      skds_pair(m, kNone, kernel, VectorXd::Constant(1, 0.4),
                VectorXd::Constant(1, 1.3))
          .value;
  CHECK(skds_empirical(m, kNone, kernel, two, Estimator::linear_pairs) ==
        pair_value);
  CHECK(skds_empirical(m, kNone, kernel, two, Estimator::u_statistic) ==
        doctest::Approx(pair_value).epsilon(1e-15));
  CHECK(kds_empirical(m, kNone, kernel, two, Estimator::linear_pairs) ==
        kds_pair(m, kNone, kernel, VectorXd::Constant(1, 0.4),
                 VectorXd::Constant(1, 1.3)));

  Dataset one;
  one.X = MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(
      skds_empirical(m, kNone, kernel, one, Estimator::linear_pairs), Error);
}

TEST_CASE("vanishing gradients at the ground-truth parameters") {
  // n = 5000 draws of N(1, 1/2); partials in (alpha, sigma) vanish at
  // (1, 2): the derivative curves change sign inside tight brackets around
  // the truth, and the values at the truth are zero at the estimator's own
  // noise scale (the per-seed standard error of the pairwise statistic).
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.5, 1);
  const Dataset data = gaussian_data(5000, 1.0, std::sqrt(0.5), 424242);

  auto model_at = [](double alpha, double sigma) {
    SdeModel m = zero_model(1);
    m.B(0, 0) = 4.0 * alpha;
    m.B(0, 1) = -4.0;
    m.diffusion_mode = DiffusionMode::diag_exp;
    m.s = VectorXd::Constant(1, std::log(sigma));
    return m;
  };
  auto partials = [&](double alpha, double sigma) {
    const LossGrad lg = skds_grad(model_at(alpha, sigma), kNone, kernel, data,
                                  Estimator::u_statistic);
    return std::pair<double, double>{4.0 * lg.grad.dB(0, 0),
                                     lg.grad.ddiff[0] / (2.0 * sigma) * 2.0};
  };

  const EmpiricalStats stats = skds_empirical_stats(
      model_at(1.0, 2.0), kNone, kernel, data, Estimator::u_statistic);
  CHECK(std::abs(stats.mean) < 0.05);

  // sign change of each partial inside the bracket around the truth
  CHECK(partials(0.9, 2.0).first < 0.0);
  CHECK(partials(1.1, 2.0).first > 0.0);
  CHECK(partials(1.0, 1.9).second < 0.0);
  CHECK(partials(1.0, 2.1).second > 0.0);

  // noise scale of the gradient at the truth from 10 disjoint sub-samples
  double g_alpha = 0.0, g_sigma = 0.0;
  {
    const auto [da, ds] = partials(1.0, 2.0);
    g_alpha = da;
    g_sigma = ds;
  }
  const int k_split = 10;
  double sa = 0.0, sa2 = 0.0, ss = 0.0, ss2 = 0.0;
  for (int part = 0; part < k_split; ++part) {
    Dataset sub;
    sub.X = data.X.block(part * 500, 0, 500, 1);
    const LossGrad lg = skds_grad(model_at(1.0, 2.0), kNone, kernel, sub,
                                  Estimator::u_statistic);
    const double da = 4.0 * lg.grad.dB(0, 0);
    const double ds = lg.grad.ddiff[0] / 2.0;
    sa += da;
    sa2 += da * da;
    ss += ds;
    ss2 += ds * ds;
  }
  const double se_alpha =
      std::sqrt((sa2 - sa * sa / k_split) / (k_split - 1) / k_split);
  const double se_sigma =
      std::sqrt((ss2 - ss * ss / k_split) / (k_split - 1) / k_split);
  CHECK(std::abs(g_alpha) <= 3.0 * se_alpha);
  CHECK(std::abs(g_sigma) <= 3.0 * se_sigma);
}

TEST_CASE("skds gradient matches finite differences over parameters") {
  SeqRng rng(127);
  for (int rep = 0; rep < 6; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    SdeModel m = rep % 2 == 0 ? oracles::random_linear_model(d, rng)
                              : make_mlp_model(d, 4, rng.next_bits());
    const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, d);
    Dataset data = rows_gaussian(24, d, rng);
    Intervention phi = Intervention::shift_on(0, rng.uniform(-0.5, 0.5));
    phi.log_scale[0] = rng.uniform(-0.2, 0.2);
    const Estimator est =
        rep % 2 == 0 ? Estimator::linear_pairs : Estimator::u_statistic;

    const LossGrad lg = skds_grad(m, phi, kernel, data, est);
    CHECK(lg.loss == skds_empirical(m, phi, kernel, data, est));

    const VectorXd theta0 = pack_theta(m);
    const VectorXd got = pack_theta_grad(m, lg.grad);
    SdeModel work = m;
    for (long i = 0; i < theta0.size(); ++i) {
      const double h = 1e-5 * (1.0 + std::abs(theta0[i]));
      VectorXd tp = theta0, tm = theta0;
      tp[i] += h;
      tm[i] -= h;
      unpack_theta(work, tp);
      const double fp = skds_empirical(work, phi, kernel, data, est);
      unpack_theta(work, tm);
      const double fm = skds_empirical(work, phi, kernel, data, est);
      CHECK(close_rel(got[i], (fp - fm) / (2.0 * h), 1e-5, 1e-3));
    }
    unpack_theta(work, theta0);

    const VectorXd phi0 = pack_phi(phi);
    const VectorXd got_phi = pack_phi_grad(phi, lg.grad);
    Intervention wphi = phi;
    for (long i = 0; i < phi0.size(); ++i) {
      const double h = 1e-5;
      VectorXd pp = phi0, pm = phi0;
      pp[i] += h;
      pm[i] -= h;
      unpack_phi(wphi, pp);
      const double fp = skds_empirical(work, wphi, kernel, data, est);
      unpack_phi(wphi, pm);
      const double fm = skds_empirical(work, wphi, kernel, data, est);
      CHECK(close_rel(got_phi[i], (fp - fm) / (2.0 * h), 1e-5, 1e-3));
    }
  }
}

TEST_CASE("kds gradient (analytic rbf) matches finite differences") {
  SeqRng rng(131);
  const int d = 2;
  SdeModel m = oracles::random_linear_model(d, rng);
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, d);
  Dataset data = rows_gaussian(16, d, rng);

  const KdsGradResult kg =
      kds_grad(m, kNone, kernel, data, Estimator::linear_pairs);
  CHECK(kg.analytic);
  CHECK(kg.loss ==
        kds_empirical(m, kNone, kernel, data, Estimator::linear_pairs));

  const VectorXd theta0 = pack_theta(m);
  const VectorXd got = pack_theta_grad(m, kg.grad);
  SdeModel work = m;
  for (long i = 0; i < theta0.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta0[i]));
    VectorXd tp = theta0, tm = theta0;
    tp[i] += h;
    tm[i] -= h;
    unpack_theta(work, tp);
    const double fp =
        kds_empirical(work, kNone, kernel, data, Estimator::linear_pairs);
    unpack_theta(work, tm);
    const double fm =
        kds_empirical(work, kNone, kernel, data, Estimator::linear_pairs);
    CHECK(close_rel(got[i], (fp - fm) / (2.0 * h), 1e-5, 1e-3));
  }
}

TEST_CASE("representer evaluation") {
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.8, 1);
  const SdeModel zeros = zero_model(1);
  SeqRng rng(137);
  Dataset data = rows_gaussian(10, 1, rng);
  CHECK(representer_eval(zeros, kNone, kernel, data,
                         VectorXd::Constant(1, 0.2))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // single sample, zero diffusion: 2 b(x1) k(x1, y)
  SdeModel m = zero_model(1);
  m.B(0, 0) = 1.5;   // constant drift b = 1.5
  Dataset one;
  one.X = MatrixXd::Constant(1, 1, 0.5);
  const VectorXd y = VectorXd::Constant(1, -0.3);
  const double expected =
      2.0 * 1.5 * kernel_value(kernel, VectorXd::Constant(1, 0.5), y);
  CHECK(representer_eval(m, kNone, kernel, one, y)[0] ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("representer halves reproduce the cross u-statistic") {
  // mean over A of S applied to the representer of B equals the mean of
  // S1 S2 K over A x B pairs.
  SeqRng rng(139);
  const int d = 2;
  const SdeModel m = oracles::random_linear_model(d, rng);
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.1, d);
  Dataset a = rows_gaussian(6, d, rng);
  Dataset b = rows_gaussian(7, d, rng);

  double lhs = 0.0;
  for (long i = 0; i < a.rows(); ++i) {
    const VectorXd x = a.X.row(i).transpose();
    const VectorXd rep = representer_eval(m, kNone, kernel, b, x);
    const MatrixXd rep_grad = representer_grad(m, kNone, kernel, b, x);
    lhs += 2.0 * drift_eval(m, x, kNone).dot(rep) +
           diffusion_a_eval(m, x, kNone).cwiseProduct(rep_grad).sum();
  }
  lhs /= static_cast<double>(a.rows());

  double rhs = 0.0;
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < b.rows(); ++j) {
      rhs += skds_pair(m, kNone, kernel, a.X.row(i).transpose(),
                       b.X.row(j).transpose())
                 .value;
    }
  }
  rhs /= static_cast<double>(a.rows() * b.rows());
  CHECK(close_rel(lhs, rhs, 1e-10, 1e-6));
}

TEST_CASE("quadratic form: pinned values") {
  // d = 1, basis {x}, no diffusion, single pair (1, 1): R = [4 x y k] = [4]
  FeatureBasis basis;
  basis.dim = 1;
  basis.entries.push_back({FeatureEntry::Kind::coordinate, 0, -1, {}, 0.0});
  DiffusionBasis dbasis;
  dbasis.dim = 1;
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, 1);
  Dataset data;
  data.X = MatrixXd::Constant(2, 1, 1.0);
  const QuadraticForm q =
      build_R_hat(basis, dbasis, kernel, data, Estimator::linear_pairs);
  CHECK(q.R_hat(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(skds_quadratic(q, VectorXd::Constant(1, 2.0)) ==
        doctest::Approx(16.0).epsilon(1e-14));
  CHECK(skds_quadratic(q, VectorXd::Zero(1)) == 0.0);

  // duplicated identical samples give a rank-one PSD form
  CHECK(min_eig_sym(q) >= -1e-10);

  QuadraticForm eye;
  eye.R_hat = MatrixXd::Identity(3, 3);
  eye.d = 3;
  eye.l = 1;
  eye.m = 0;
  CHECK(min_eig_sym(eye) == doctest::Approx(1.0));
}

TEST_CASE("quadratic identity against the assembled linear model") {
  SeqRng rng(149);
  for (int rep = 0; rep < 12; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const int extra = static_cast<int>(rng.uniform_int(3));
    FeatureBasis basis = FeatureBasis::affine(d);
    for (int e = 0; e < extra; ++e) {
      basis.entries.push_back({FeatureEntry::Kind::monomial,
                               static_cast<int>(rng.uniform_int(d)),
                               static_cast<int>(rng.uniform_int(d)),
                               {},
                               0.0});
    }
    DiffusionBasis dbasis = DiffusionBasis::coordinates(d);
    if (rng.bernoulli(0.5)) {
      VectorXd v(d);
      for (int i = 0; i < d; ++i) v[i] = rng.uniform(-1, 1);
      dbasis.entries.push_back({DiffusionField::Kind::constant_vector, 0, v});
    }

    const KernelSpec kernel = make_kernel(
        rep % 2 == 0 ? KernelFamily::rbf : KernelFamily::tilted_rbf, 0.9, d);
    Dataset data = rows_gaussian(8 + 2 * static_cast<long>(rng.uniform_int(12)),
                               d, rng);
    const Estimator est =
        rep % 2 == 0 ? Estimator::linear_pairs : Estimator::u_statistic;
    const QuadraticForm q = build_R_hat(basis, dbasis, kernel, data, est);
    CHECK((q.R_hat - q.R_hat.transpose()).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, q.R_hat.cwiseAbs().maxCoeff()));

    VectorXd theta(q.size());
    for (long i = 0; i < theta.size(); ++i) theta[i] = rng.uniform(-1.5, 1.5);
    const SdeModel lin = linear_model_from_theta(basis, dbasis, theta);
    const double via_quad = skds_quadratic(q, theta);
    const double via_loss = skds_empirical(lin, kNone, kernel, data, est);
    CHECK(std::abs(via_quad - via_loss) <=
          1e-10 * std::max(1.0, std::abs(via_quad)));
  }
}

TEST_CASE("scale covariance of the loss") {
  SeqRng rng(151);
  const int d = 3;
  SdeModel m = oracles::random_linear_model(d, rng);
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, d);
  Dataset data = rows_gaussian(32, d, rng);
  const double base =
      skds_empirical(m, kNone, kernel, data, Estimator::linear_pairs);

  const double scale = 1.75;
  SdeModel scaled = m;
  scaled.B *= scale;
  scaled.A *= scale;
  const double scaled_loss =
      skds_empirical(scaled, kNone, kernel, data, Estimator::linear_pairs);
  CHECK(close_rel(scaled_loss, scale * scale * base, 1e-12,
                  1e-9 * std::abs(base)));
}

TEST_CASE("linear-pairs estimator agrees with the u-statistic in expectation") {
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 0.5, 1);
  const SdeModel m = example_model();

  const Dataset big = gaussian_data(20000, 1.0, std::sqrt(0.5), 5150);
  const double reference =
      skds_empirical(m, kNone, kernel, big, Estimator::u_statistic);

  double sum = 0.0, sumsq = 0.0;
  const int resamples = 200;
  for (int r = 0; r < resamples; ++r) {
    const Dataset data =
        gaussian_data(200, 1.0, std::sqrt(0.5), 9000 + static_cast<std::uint64_t>(r));
    const double v =
        skds_empirical(m, kNone, kernel, data, Estimator::linear_pairs);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / resamples;
  const double sd =
      std::sqrt((sumsq - resamples * mean * mean) / (resamples - 1));
  const double se = sd / std::sqrt(static_cast<double>(resamples));
  CHECK(std::abs(mean - reference) <= 3.0 * se);
}

TEST_CASE("deterministic block reduction across worker counts") {
  SeqRng rng(157);
  const int d = 3;
  const SdeModel m = oracles::random_linear_model(d, rng);
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, 1.0, d);
  Dataset data = rows_gaussian(4096, d, rng);

  set_worker_override(1);
  const double serial =
      skds_empirical(m, kNone, kernel, data, Estimator::linear_pairs);
  const LossGrad serial_grad =
      skds_grad(m, kNone, kernel, data, Estimator::linear_pairs);
  set_worker_override(4);
  const double parallel =
      skds_empirical(m, kNone, kernel, data, Estimator::linear_pairs);
  const LossGrad parallel_grad =
      skds_grad(m, kNone, kernel, data, Estimator::linear_pairs);
  set_worker_override(-1);

  CHECK(serial == parallel);   // bitwise, by the fixed block combination
  CHECK((pack_theta_grad(m, serial_grad.grad) -
         pack_theta_grad(m, parallel_grad.grad))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("timing bench runs and is value-deterministic") {
  const TimingReport a = timing_bench(KernelFamily::rbf, 2, 64, 3, 99);
  const TimingReport b = timing_bench(KernelFamily::rbf, 2, 64, 3, 99);
  CHECK(a.skds_ms_mean > 0.0);
  CHECK(a.kds_ms_mean > 0.0);
  CHECK(a.skds_loss == b.skds_loss);
  CHECK(a.kds_loss == b.kds_loss);
  CHECK(a.kds_gradient_analytic);
}
