#include "stadion/models.hpp"

#include <cmath>

namespace stadion {

double FeatureEntry::eval(const VectorXd& x) const {
  switch (kind) {
    case Kind::constant: return 1.0;
    case Kind::coordinate: return x[i];
    case Kind::monomial: return x[i] * x[j];
    case Kind::tanh_ridge: return std::tanh(w.dot(x) + c);
  }
  return 0.0;
}

std::vector<int> FeatureEntry::support() const {
  switch (kind) {
    case Kind::constant: return {};
    case Kind::coordinate: return {i};
    case Kind::monomial: return i == j ? std::vector<int>{i}
                                       : std::vector<int>{i, j};
    case Kind::tanh_ridge: {
      std::vector<int> out;
      for (int p = 0; p < w.size(); ++p) {
        if (w[p] != 0.0) out.push_back(p);
      }
      return out;
    }
  }
  return {};
}

VectorXd FeatureBasis::eval(const VectorXd& x) const {
  VectorXd out(size());
  for (int q = 0; q < size(); ++q) out[q] = entries[q].eval(x);
  return out;
}

FeatureBasis FeatureBasis::affine(int d) {
  FeatureBasis basis;
  basis.dim = d;
  basis.entries.push_back({FeatureEntry::Kind::constant, -1, -1, {}, 0.0});
  for (int i = 0; i < d; ++i) {
    basis.entries.push_back({FeatureEntry::Kind::coordinate, i, -1, {}, 0.0});
  }
  return basis;
}

VectorXd DiffusionField::eval(const VectorXd& x, int d) const {
  (void)x;
  if (kind == Kind::unit_coordinate) {
    VectorXd e = VectorXd::Zero(d);
    e[j] = 1.0;
    return e;
  }
  return v;
}

MatrixXd DiffusionBasis::outer(int index, const VectorXd& x) const {
  const VectorXd f = entries[index].eval(x, dim);
  return f * f.transpose();
}

DiffusionBasis DiffusionBasis::coordinates(int d) {
  DiffusionBasis basis;
  basis.dim = d;
  for (int j = 0; j < d; ++j) {
    basis.entries.push_back({DiffusionField::Kind::unit_coordinate, j, {}});
  }
  return basis;
}

Intervention Intervention::shift_on(int target, double delta) {
  Intervention phi;
  phi.targets = {target};
  phi.shift = VectorXd::Constant(1, delta);
  phi.log_scale = VectorXd::Zero(1);
  return phi;
}

void Intervention::validate(int d) const {
  require(shift.size() == static_cast<long>(targets.size()) &&
              log_scale.size() == static_cast<long>(targets.size()),
          ErrorCode::invalid_input, "intervention slot count mismatch");
  for (int t : targets) {
    require(t >= 0 && t < d, ErrorCode::invalid_input,
            "intervention target out of range");
  }
}

SdeModel make_linear_model(int d) {
  SdeModel m;
  m.d = d;
  m.kind = DriftKind::linear;
  m.basis = FeatureBasis::affine(d);
  m.B = MatrixXd::Zero(d, m.basis.size());
  m.fixed_mask = MaskXb::Constant(d, m.basis.size(), false);
  for (int j = 0; j < d; ++j) {
    m.B(j, 1 + j) = -1.0;        // self weight pinned, see speed scaling
    m.fixed_mask(j, 1 + j) = true;
  }
  m.diffusion_mode = DiffusionMode::diag_exp;
  m.s = VectorXd::Zero(d);
  return m;
}

SdeModel make_mlp_model(int d, int hidden, std::uint64_t seed) {
  SdeModel m;
  m.d = d;
  m.kind = DriftKind::mlp;
  m.hidden = hidden;
  SeqRng rng(mix64(seed) ^ 0x6d6c70ULL);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j) {
    MlpCoord c;
    c.bias = 0.0;
    c.w = VectorXd(hidden);
    c.v = VectorXd::Zero(hidden);
    c.U = MatrixXd(hidden, d);
    for (int r = 0; r < hidden; ++r) {
      c.w[r] = scale * rng.normal();
      for (int p = 0; p < d; ++p) c.U(r, p) = scale * rng.normal();
    }
    c.U.col(j).setZero();
    m.coords.push_back(std::move(c));
  }
  m.diffusion_mode = DiffusionMode::diag_exp;
  m.s = VectorXd::Zero(d);
  return m;
}

SdeModel model_from_linear_system(const MatrixXd& M, const VectorXd& mean,
                                  const VectorXd& D_diag) {
  const int d = static_cast<int>(M.rows());
  require(M.cols() == d && mean.size() == d && D_diag.size() == d,
          ErrorCode::invalid_input, "linear system shape mismatch");
  SdeModel m;
  m.d = d;
  m.kind = DriftKind::linear;
  m.basis = FeatureBasis::affine(d);
  m.B = MatrixXd::Zero(d, d + 1);
  m.B.col(0) = -M * mean;
  m.B.rightCols(d) = M;
  m.fixed_mask = MaskXb::Constant(d, d + 1, false);
  m.diffusion_mode = DiffusionMode::diag_exp;
  m.s = VectorXd(d);
  for (int j = 0; j < d; ++j) {
    require(D_diag[j] >= 0.0, ErrorCode::invalid_input,
            "diffusion entries must be nonnegative");
    m.s[j] = D_diag[j] > 0.0 ? std::log(D_diag[j])
                             : -400.0;   // exp(2s) underflows to exactly 0
  }
  return m;
}

namespace {

void check_x(const SdeModel& model, const VectorXd& x) {
  require(x.size() == model.d, ErrorCode::invalid_input,
          "state dimension mismatch");
  require(x.allFinite(), ErrorCode::invalid_input, "state must be finite");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

VectorXd drift_eval(const SdeModel& model, const VectorXd& x,
                    const Intervention& phi) {
  check_x(model, x);
  phi.validate(model.d);
  VectorXd b(model.d);
  if (model.kind == DriftKind::linear) {
    b = model.B * model.basis.eval(x);
  } else {
    for (int j = 0; j < model.d; ++j) {
      const MlpCoord& c = model.coords[j];
      const VectorXd z = c.U * x + c.v;
      double acc = c.bias - x[j];
      for (int r = 0; r < c.w.size(); ++r) acc += c.w[r] * sigmoid(z[r]);
      b[j] = acc;
    }
  }
  for (size_t t = 0; t < phi.targets.size(); ++t) {
    b[phi.targets[t]] += phi.shift[t];
  }
  return b;
}

MatrixXd diffusion_a_eval(const SdeModel& model, const VectorXd& x,
                          const Intervention& phi) {
  check_x(model, x);
  phi.validate(model.d);
  MatrixXd a;
  if (model.diffusion_mode == DiffusionMode::diag_exp) {
    a = MatrixXd::Zero(model.d, model.d);
    for (int j = 0; j < model.d; ++j) a(j, j) = std::exp(2.0 * model.s[j]);
    for (size_t t = 0; t < phi.targets.size(); ++t) {
      const double beta = phi.beta(static_cast<int>(t));
      a(phi.targets[t], phi.targets[t]) *= beta * beta;
    }
  } else {
    a = MatrixXd::Zero(model.d, model.d);
    for (int i = 0; i < model.dbasis.size(); ++i) {
      a += model.A[i] * model.dbasis.outer(i, x);
    }
    // beta scales sigma row-wise on targets, so a picks up the factor on
    // both the row and the column of each target.
    for (size_t t = 0; t < phi.targets.size(); ++t) {
      const double beta = phi.beta(static_cast<int>(t));
      a.row(phi.targets[t]) *= beta;
      a.col(phi.targets[t]) *= beta;
    }
  }
  return a;
}

ParamGrad& ParamGrad::operator+=(const ParamGrad& other) {
  if (other.dB.size() > 0) {
    dB.size() > 0 ? void(dB += other.dB) : void(dB = other.dB);
  }
  if (!other.dmlp.empty()) {
    if (dmlp.empty()) {
      dmlp = other.dmlp;
    } else {
      for (size_t j = 0; j < dmlp.size(); ++j) {
        dmlp[j].bias += other.dmlp[j].bias;
        dmlp[j].w += other.dmlp[j].w;
        dmlp[j].U += other.dmlp[j].U;
        dmlp[j].v += other.dmlp[j].v;
      }
    }
  }
  if (other.ddiff.size() > 0) {
    ddiff.size() > 0 ? void(ddiff += other.ddiff) : void(ddiff = other.ddiff);
  }
  if (other.dshift.size() > 0) {
    dshift.size() > 0 ? void(dshift += other.dshift)
                      : void(dshift = other.dshift);
  }
  if (other.dbeta.size() > 0) {
    dbeta.size() > 0 ? void(dbeta += other.dbeta) : void(dbeta = other.dbeta);
  }
  return *this;
}

ParamGrad& ParamGrad::operator*=(double factor) {
  if (dB.size() > 0) dB *= factor;
  for (auto& g : dmlp) {
    g.bias *= factor;
    g.w *= factor;
    g.U *= factor;
    g.v *= factor;
  }
  if (ddiff.size() > 0) ddiff *= factor;
  if (dshift.size() > 0) dshift *= factor;
  if (dbeta.size() > 0) dbeta *= factor;
  return *this;
}

ParamGrad zero_grad(const SdeModel& model, const Intervention& phi) {
  ParamGrad g;
  if (model.kind == DriftKind::linear) {
    g.dB = MatrixXd::Zero(model.d, model.feature_count());
  } else {
    for (const MlpCoord& c : model.coords) {
      MlpCoord z;
      z.bias = 0.0;
      z.w = VectorXd::Zero(c.w.size());
      z.U = MatrixXd::Zero(c.U.rows(), c.U.cols());
      z.v = VectorXd::Zero(c.v.size());
      g.dmlp.push_back(std::move(z));
    }
  }
  g.ddiff = VectorXd::Zero(model.diffusion_count());
  g.dshift = VectorXd::Zero(static_cast<long>(phi.targets.size()));
  g.dbeta = VectorXd::Zero(static_cast<long>(phi.targets.size()));
  return g;
}

void drift_vjp(const SdeModel& model, const VectorXd& x,
               const Intervention& phi, const VectorXd& cot,
               ParamGrad& grad) {
  check_x(model, x);
  require(cot.size() == model.d, ErrorCode::invalid_input,
          "cotangent dimension mismatch");
  require(cot.allFinite(), ErrorCode::invalid_input,
          "cotangent must be finite");
  if (model.kind == DriftKind::linear) {
    grad.dB += cot * model.basis.eval(x).transpose();
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (model.fixed_mask(j, q)) grad.dB(j, q) = 0.0;
      }
    }
  } else {
    for (int j = 0; j < model.d; ++j) {
      const MlpCoord& c = model.coords[j];
      MlpCoord& g = grad.dmlp[j];
      const VectorXd z = c.U * x + c.v;
      g.bias += cot[j];
      for (int r = 0; r < c.w.size(); ++r) {
        const double sig = sigmoid(z[r]);
        g.w[r] += cot[j] * sig;
        const double tr = cot[j] * c.w[r] * sig * (1.0 - sig);
        g.v[r] += tr;
        g.U.row(r) += tr * x.transpose();
      }
      g.U.col(j).setZero();
    }
  }
  for (size_t t = 0; t < phi.targets.size(); ++t) {
    grad.dshift[t] += cot[phi.targets[t]];
  }
}

ParamGrad drift_vjp(const SdeModel& model, const VectorXd& x,
                    const Intervention& phi, const VectorXd& cot) {
  ParamGrad grad = zero_grad(model, phi);
  drift_vjp(model, x, phi, cot, grad);
  return grad;
}

void diffusion_vjp(const SdeModel& model, const VectorXd& x,
                   const Intervention& phi, const MatrixXd& cot,
                   ParamGrad& grad) {
  check_x(model, x);
  require(cot.rows() == model.d && cot.cols() == model.d,
          ErrorCode::invalid_input, "cotangent shape mismatch");
  require(cot.allFinite(), ErrorCode::invalid_input,
          "cotangent must be finite");
  if (model.diffusion_mode == DiffusionMode::diag_exp) {
    VectorXd beta2 = VectorXd::Ones(model.d);
    for (size_t t = 0; t < phi.targets.size(); ++t) {
      const double beta = phi.beta(static_cast<int>(t));
      beta2[phi.targets[t]] = beta * beta;
    }
    for (int j = 0; j < model.d; ++j) {
      grad.ddiff[j] += 2.0 * std::exp(2.0 * model.s[j]) * beta2[j] * cot(j, j);
    }
    for (size_t t = 0; t < phi.targets.size(); ++t) {
      const int j = phi.targets[t];
      const double beta = phi.beta(static_cast<int>(t));
      grad.dbeta[t] += 2.0 * beta * std::exp(2.0 * model.s[j]) * cot(j, j);
    }
  } else {
    VectorXd sv = VectorXd::Ones(model.d);   // diag of the beta scaling
    for (size_t t = 0; t < phi.targets.size(); ++t) {
      sv[phi.targets[t]] = phi.beta(static_cast<int>(t));
    }
    // <cot, S a0 S> = <S cot S, a0>
    const MatrixXd scaled =
        sv.asDiagonal() * cot * sv.asDiagonal();
    for (int i = 0; i < model.dbasis.size(); ++i) {
      grad.ddiff[i] += scaled.cwiseProduct(model.dbasis.outer(i, x)).sum();
    }
    if (!phi.targets.empty()) {
      MatrixXd a0 = MatrixXd::Zero(model.d, model.d);
      for (int i = 0; i < model.dbasis.size(); ++i) {
        a0 += model.A[i] * model.dbasis.outer(i, x);
      }
      for (size_t t = 0; t < phi.targets.size(); ++t) {
        const int j = phi.targets[t];
        double acc = 0.0;
        for (int q = 0; q < model.d; ++q) {
          acc += cot(j, q) * a0(j, q) * sv[q] + cot(q, j) * sv[q] * a0(q, j);
        }
        grad.dbeta[t] += acc;
      }
    }
  }
}

ParamGrad diffusion_vjp(const SdeModel& model, const VectorXd& x,
                        const Intervention& phi, const MatrixXd& cot) {
  ParamGrad grad = zero_grad(model, phi);
  diffusion_vjp(model, x, phi, cot, grad);
  return grad;
}

VectorXd pack_theta(const SdeModel& model) {
  std::vector<double> out;
  if (model.kind == DriftKind::linear) {
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (!model.fixed_mask(j, q)) out.push_back(model.B(j, q));
      }
    }
  } else {
    for (size_t j = 0; j < model.coords.size(); ++j) {
      const MlpCoord& c = model.coords[j];
      out.push_back(c.bias);
      for (int r = 0; r < c.w.size(); ++r) out.push_back(c.w[r]);
      for (int r = 0; r < c.U.rows(); ++r) {
        for (int p = 0; p < c.U.cols(); ++p) {
          if (p != static_cast<int>(j)) out.push_back(c.U(r, p));
        }
      }
      for (int r = 0; r < c.v.size(); ++r) out.push_back(c.v[r]);
    }
  }
  for (int i = 0; i < model.diffusion_count(); ++i) {
    out.push_back(model.diffusion_mode == DiffusionMode::diag_exp
                      ? model.s[i]
                      : model.A[i]);
  }
  return Eigen::Map<VectorXd>(out.data(), static_cast<long>(out.size()));
}

void unpack_theta(SdeModel& model, const VectorXd& theta) {
  long pos = 0;
  if (model.kind == DriftKind::linear) {
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (!model.fixed_mask(j, q)) model.B(j, q) = theta[pos++];
      }
    }
  } else {
    for (size_t j = 0; j < model.coords.size(); ++j) {
      MlpCoord& c = model.coords[j];
      c.bias = theta[pos++];
      for (int r = 0; r < c.w.size(); ++r) c.w[r] = theta[pos++];
      for (int r = 0; r < c.U.rows(); ++r) {
        for (int p = 0; p < c.U.cols(); ++p) {
          if (p != static_cast<int>(j)) c.U(r, p) = theta[pos++];
        }
      }
      for (int r = 0; r < c.v.size(); ++r) c.v[r] = theta[pos++];
    }
  }
  for (int i = 0; i < model.diffusion_count(); ++i) {
    (model.diffusion_mode == DiffusionMode::diag_exp ? model.s[i]
                                                     : model.A[i]) =
        theta[pos++];
  }
  require(pos == theta.size(), ErrorCode::invalid_input,
          "theta length does not match the model layout");
}

VectorXd pack_theta_grad(const SdeModel& model, const ParamGrad& grad) {
  std::vector<double> out;
  if (model.kind == DriftKind::linear) {
    for (int j = 0; j < model.d; ++j) {
      for (int q = 0; q < model.feature_count(); ++q) {
        if (!model.fixed_mask(j, q)) out.push_back(grad.dB(j, q));
      }
    }
  } else {
    for (size_t j = 0; j < grad.dmlp.size(); ++j) {
      const MlpCoord& g = grad.dmlp[j];
      out.push_back(g.bias);
      for (int r = 0; r < g.w.size(); ++r) out.push_back(g.w[r]);
      for (int r = 0; r < g.U.rows(); ++r) {
        for (int p = 0; p < g.U.cols(); ++p) {
          if (p != static_cast<int>(j)) out.push_back(g.U(r, p));
        }
      }
      for (int r = 0; r < g.v.size(); ++r) out.push_back(g.v[r]);
    }
  }
  for (int i = 0; i < model.diffusion_count(); ++i) {
    out.push_back(grad.ddiff[i]);
  }
  return Eigen::Map<VectorXd>(out.data(), static_cast<long>(out.size()));
}

VectorXd pack_phi(const Intervention& phi) {
  const long k = static_cast<long>(phi.targets.size());
  VectorXd out(2 * k);
  out.head(k) = phi.shift;
  out.tail(k) = phi.log_scale;
  return out;
}

void unpack_phi(Intervention& phi, const VectorXd& packed) {
  const long k = static_cast<long>(phi.targets.size());
  require(packed.size() == 2 * k, ErrorCode::invalid_input,
          "phi length mismatch");
  phi.shift = packed.head(k);
  phi.log_scale = packed.tail(k);
}

VectorXd pack_phi_grad(const Intervention& phi, const ParamGrad& grad) {
  const long k = static_cast<long>(phi.targets.size());
  VectorXd out(2 * k);
  out.head(k) = grad.dshift;
  for (long t = 0; t < k; ++t) {
    out[k + t] = grad.dbeta[t] * phi.beta(static_cast<int>(t));
  }
  return out;
}

}  // namespace stadion
