#include "stadion/models.hpp"

#include "oracles.hpp"
#include "stadion/io.hpp"

#include <doctest.h>

#include <cmath>

using namespace stadion;
using oracles::close_rel;

namespace {

SdeModel ou_1d(double alpha, double slope) {
  // b(x) = slope * (x - alpha) over the affine basis
  SdeModel m = make_linear_model(1);
  m.B(0, 0) = -slope * alpha;
  m.B(0, 1) = slope;
  m.fixed_mask(0, 1) = false;
  return m;
}

}  // namespace

TEST_CASE("linear drift pinned values") {
  SdeModel m = ou_1d(1.0, -4.0);   // b(x) = -4 (x - 1)
  CHECK(drift_eval(m, VectorXd::Constant(1, 1.0),
                   Intervention::identity())[0] == doctest::Approx(0.0));
  CHECK(drift_eval(m, VectorXd::Constant(1, 0.0),
                   Intervention::identity())[0] == doctest::Approx(4.0));
}

TEST_CASE("mlp reduces to the skip term with zero weights") {
  SdeModel m = make_mlp_model(3, 8, 1);
  for (MlpCoord& c : m.coords) {
    c.w.setZero();
    c.bias = 0.0;
  }
  SeqRng rng(5);
  const VectorXd x = oracles::random_vector(3, rng);
  const VectorXd b = drift_eval(m, x, Intervention::identity());
  CHECK((b + x).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("shift intervention adds to target coordinates") {
  SeqRng rng(7);
  SdeModel m = oracles::random_linear_model(2, rng);
  const VectorXd x = oracles::random_vector(2, rng);
  const VectorXd base = drift_eval(m, x, Intervention::identity());
  const VectorXd shifted = drift_eval(m, x, Intervention::shift_on(0, 2.0));
  CHECK(shifted[0] == doctest::Approx(base[0] + 2.0));
  CHECK(shifted[1] == base[1]);
}

TEST_CASE("diffusion pinned values") {
  SdeModel m = make_linear_model(2);
  CHECK((diffusion_a_eval(m, VectorXd::Zero(2), Intervention::identity()) -
         MatrixXd::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  SdeModel m1 = make_linear_model(1);
  m1.s[0] = std::log(2.0);
  CHECK(diffusion_a_eval(m1, VectorXd::Zero(1), Intervention::identity())(0, 0) ==
        doctest::Approx(4.0));

  SdeModel m2 = make_linear_model(1);
  Intervention phi = Intervention::shift_on(0, 0.0);
  phi.log_scale[0] = std::log(3.0);
  CHECK(diffusion_a_eval(m2, VectorXd::Zero(1), phi)(0, 0) ==
        doctest::Approx(9.0));
}

TEST_CASE("empty intervention is an exact identity") {
  SeqRng rng(9);
  SdeModel m = oracles::random_linear_model(3, rng);
  const VectorXd x = oracles::random_vector(3, rng);
  const Intervention none = Intervention::identity();
  Intervention explicit_none;
  CHECK((drift_eval(m, x, none) - drift_eval(m, x, explicit_none))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((diffusion_a_eval(m, x, none) - diffusion_a_eval(m, x, explicit_none))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

namespace {

// <cot, b(x)> as a function of the packed (theta, phi) parameters.
double drift_pairing(SdeModel model, Intervention phi, const VectorXd& theta,
                     const VectorXd& phi_packed, const VectorXd& x,
                     const VectorXd& cot) {
  unpack_theta(model, theta);
  if (phi_packed.size() > 0) unpack_phi(phi, phi_packed);
  return cot.dot(drift_eval(model, x, phi));
}

double diffusion_pairing(SdeModel model, Intervention phi,
                         const VectorXd& theta, const VectorXd& beta,
                         const VectorXd& x, const MatrixXd& cot) {
  unpack_theta(model, theta);
  for (long t = 0; t < beta.size(); ++t) phi.log_scale[t] = std::log(beta[t]);
  return cot.cwiseProduct(diffusion_a_eval(model, x, phi)).sum();
}

}  // namespace

TEST_CASE("drift vjp matches finite differences") {
  SeqRng rng(13);
  for (int d : {1, 3, 5}) {
    for (int rep = 0; rep < 10; ++rep) {
      SdeModel m = oracles::random_linear_model(d, rng);
      Intervention phi = Intervention::shift_on(d / 2, rng.uniform(-1, 1));
      const VectorXd x = oracles::random_vector(d, rng);
      const VectorXd cot = oracles::random_vector(d, rng);

      const ParamGrad grad = drift_vjp(m, x, phi, cot);
      const VectorXd theta0 = pack_theta(m);
      const VectorXd phi0 = pack_phi(phi);

      const VectorXd fd_theta = oracles::fd_grad(
          [&](const VectorXd& th) {
            return drift_pairing(m, phi, th, phi0, x, cot);
          },
          theta0);
      const VectorXd packed = pack_theta_grad(m, grad);
      for (long i = 0; i < packed.size(); ++i) {
        CHECK(close_rel(packed[i], fd_theta[i], 1e-6));
      }
      CHECK(grad.dshift[0] == doctest::Approx(cot[d / 2]));

      // dense container: outer product of cotangent and features
      const VectorXd feats = m.basis.eval(x);
      for (int i = 0; i < d; ++i) {
        for (int q = 0; q < m.feature_count(); ++q) {
          CHECK(grad.dB(i, q) == doctest::Approx(cot[i] * feats[q]));
        }
      }
    }
  }
}

TEST_CASE("frozen entries receive zero gradient") {
  SdeModel m = make_linear_model(2);
  const ParamGrad grad = drift_vjp(m, VectorXd::Constant(2, 0.3),
                                   Intervention::identity(),
                                   VectorXd::Constant(2, 1.0));
  for (int j = 0; j < 2; ++j) {
    CHECK(grad.dB(j, 1 + j) == 0.0);
  }
}

TEST_CASE("mlp drift vjp matches finite differences") {
  SeqRng rng(17);
  for (int d : {2, 3}) {
    for (int h : {4, 8}) {
      SdeModel m = make_mlp_model(d, h, rng.next_bits());
      // move away from the symmetric init
      for (MlpCoord& c : m.coords) {
        c.bias = rng.uniform(-0.5, 0.5);
        for (int r = 0; r < h; ++r) c.v[r] = rng.uniform(-0.5, 0.5);
      }
      Intervention phi = Intervention::identity();
      const VectorXd x = oracles::random_vector(d, rng);
      const VectorXd cot = oracles::random_vector(d, rng);

      const ParamGrad zero_cot = drift_vjp(m, x, phi, VectorXd::Zero(d));
      CHECK(pack_theta_grad(m, zero_cot).cwiseAbs().maxCoeff() == 0.0);

      const ParamGrad grad = drift_vjp(m, x, phi, cot);
      const VectorXd theta0 = pack_theta(m);
      const VectorXd fd_theta = oracles::fd_grad(
          [&](const VectorXd& th) {
            return drift_pairing(m, phi, th, VectorXd(), x, cot);
          },
          theta0);
      const VectorXd packed = pack_theta_grad(m, grad);
      for (long i = 0; i < packed.size(); ++i) {
        CHECK(close_rel(packed[i], fd_theta[i], 1e-6));
      }
      for (int j = 0; j < d; ++j) {
        CHECK(grad.dmlp[j].U.col(j).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("diffusion vjp matches finite differences") {
  SeqRng rng(19);
  for (int d : {1, 3, 5}) {
    for (bool cone : {false, true}) {
      SdeModel m = oracles::random_linear_model(d, rng, cone);
      Intervention phi = Intervention::shift_on(0, 0.0);
      phi.log_scale[0] = rng.uniform(-0.3, 0.3);
      const VectorXd x = oracles::random_vector(d, rng);
      MatrixXd cot(d, d);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) cot(i, j) = rng.normal();
      }

      const ParamGrad zero_cot = diffusion_vjp(m, x, phi, MatrixXd::Zero(d, d));
      CHECK(zero_cot.ddiff.cwiseAbs().maxCoeff() == 0.0);
      CHECK(zero_cot.dbeta.cwiseAbs().maxCoeff() == 0.0);

      const ParamGrad grad = diffusion_vjp(m, x, phi, cot);
      const VectorXd theta0 = pack_theta(m);
      VectorXd beta0(1);
      beta0[0] = phi.beta(0);

      const VectorXd fd_theta = oracles::fd_grad(
          [&](const VectorXd& th) {
            return diffusion_pairing(m, phi, th, beta0, x, cot);
          },
          theta0);
      const VectorXd packed = pack_theta_grad(m, grad);
      for (long i = 0; i < packed.size(); ++i) {
        CHECK(close_rel(packed[i], fd_theta[i], 1e-6));
      }

      const VectorXd fd_beta = oracles::fd_grad(
          [&](const VectorXd& b) {
            return diffusion_pairing(m, phi, theta0, b, x, cot);
          },
          beta0);
      CHECK(close_rel(grad.dbeta[0], fd_beta[0], 1e-6));
    }
  }
}

TEST_CASE("diag_exp vjp pinned value") {
  SdeModel m = make_linear_model(1);
  const ParamGrad grad = diffusion_vjp(m, VectorXd::Zero(1),
                                       Intervention::identity(),
                                       MatrixXd::Identity(1, 1));
  CHECK(grad.ddiff[0] == doctest::Approx(2.0));
}

TEST_CASE("frozen entries survive pack/unpack round trips") {
  SdeModel m = make_linear_model(3);
  VectorXd theta = pack_theta(m);
  for (long i = 0; i < theta.size(); ++i) theta[i] += 0.37 * (i + 1);
  unpack_theta(m, theta);
  for (int j = 0; j < 3; ++j) {
    CHECK(m.B(j, 1 + j) == -1.0);
  }
  const VectorXd back = pack_theta(m);
  CHECK((back - theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis_cone diffusion stays PSD after projection") {
  SeqRng rng(29);
  SdeModel m = oracles::random_linear_model(4, rng, true);
  for (int rep = 0; rep < 20; ++rep) {
    for (long i = 0; i < m.A.size(); ++i) {
      m.A[i] = rng.uniform(-1.0, 1.0);
    }
    m.A = m.A.cwiseMax(0.0);
    const MatrixXd a = diffusion_a_eval(m, oracles::random_vector(4, rng),
                                        Intervention::identity());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("model json round trip") {
  SeqRng rng(31);
  SdeModel linear = oracles::random_linear_model(3, rng);
  const SdeModel linear2 = model_from_json(model_to_json(linear));
  CHECK((linear2.B - linear.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pack_theta(linear2) - pack_theta(linear)).cwiseAbs().maxCoeff() ==
        0.0);

  SdeModel mlp = make_mlp_model(2, 4, 77);
  const SdeModel mlp2 = model_from_json(model_to_json(mlp));
  CHECK((pack_theta(mlp2) - pack_theta(mlp)).cwiseAbs().maxCoeff() == 0.0);

  Intervention phi = Intervention::shift_on(1, -0.7);
  phi.log_scale[0] = 0.25;
  const Intervention phi2 = intervention_from_json(intervention_to_json(phi));
  CHECK(phi2.targets == phi.targets);
  CHECK(phi2.shift[0] == doctest::Approx(phi.shift[0]));
  CHECK(phi2.log_scale[0] == doctest::Approx(phi.log_scale[0]).epsilon(1e-12));
}

TEST_CASE("model input validation") {
  SdeModel m = make_linear_model(2);
  CHECK_THROWS_AS(drift_eval(m, VectorXd::Zero(3), Intervention::identity()),
                  Error);
  Intervention bad = Intervention::shift_on(5, 1.0);
  CHECK_THROWS_AS(drift_eval(m, VectorXd::Zero(2), bad), Error);
}
