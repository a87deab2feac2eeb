#include "groupobs/observer.hpp"

#include <cmath>
#include <stdexcept>

namespace groupobs {

Eigen::MatrixXd bias_dagger_rows(const Eigen::VectorXd& zbar, const Eigen::VectorXd& dunder,
                                 int d, bool include_omega) {
  const int nm = static_cast<int>(dunder.size());
  const int wcols = include_omega ? so_dim(d) : 0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, wcols + d * nm);
  if (include_omega) {
    if (d == 3) {
      J.leftCols(3) = -hat(zbar, 3);
    } else {
      J(0, 0) = -zbar(1);
      J(1, 0) = zbar(0);
    }
  }
  for (int c = 0; c < nm; ++c) {
    J.block(0, wcols + c * d, d, d) = dunder(c) * Eigen::MatrixXd::Identity(d, d);
  }
  return J;
}

Eigen::MatrixXd bias_jacobian(const Eigen::VectorXd& z_unmerged, const DirectionTable& table,
                              bool include_omega) {
  const int d = table.d;
  const int nm = table.n + table.m;
  const int cols = (include_omega ? so_dim(d) : 0) + d * nm;
  Eigen::MatrixXd J(table.M * table.N * d, cols);
  for (int i = 0; i < table.M; ++i) {
    for (int j = 0; j < table.N; ++j) {
      const int row = (i * table.N + j) * d;
      J.middleRows(row, d) = bias_dagger_rows(z_unmerged.segment(row, d),
                                              table.underlined[i][j], d, include_omega);
    }
  }
  return J;
}

Eigen::MatrixXd bearing_projector(const Eigen::VectorXd& ybar) {
  const double nrm = ybar.norm();
  if (nrm < kBearingMinNorm) {
    throw std::invalid_argument("bearing_projector: direction too close to zero");
  }
  const Eigen::VectorXd u = ybar / nrm;
  return Eigen::MatrixXd::Identity(ybar.size(), ybar.size()) - u * u.transpose();
}

double range_virtual_measurement(double y) { return 0.5 * y * y; }

double range_measurement_variance(double y, double r_range) {
  return y * y * r_range + 0.5 * r_range * r_range;
}

ImmersedObserver::ImmersedObserver(ImmersedModel model, ObserverConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  if (cfg_.q <= 0.0 || cfg_.r_landmark <= 0.0 || cfg_.r_bearing <= 0.0 ||
      cfg_.r_range <= 0.0 || cfg_.p0 <= 0.0) {
    throw std::invalid_argument("ObserverConfig: weights must be positive");
  }
  if (cfg_.lambda < 0.0) {
    throw std::invalid_argument("ObserverConfig: lambda must be nonnegative");
  }
}

int ImmersedObserver::bdim() const {
  const int d = model_.d();
  const int nm = model_.spec.n + model_.spec.m;
  switch (cfg_.bias_mode) {
    case BiasMode::Off:
      return 0;
    case BiasMode::RhoOnly:
      return d * nm;
    case BiasMode::Full:
      return so_dim(d) + d * nm;
  }
  return 0;
}

Eigen::VectorXd ImmersedObserver::pack(const ObserverState& state) const {
  Eigen::VectorXd x(xdim());
  x.head(zdim()) = state.zhat;
  if (sdim() > 0) x.segment(zdim(), sdim()) = state.shat;
  if (bdim() > 0) x.tail(bdim()) = state.bhat;
  return x;
}

void ImmersedObserver::unpack(const Eigen::VectorXd& x, ObserverState& state) const {
  state.zhat = x.head(zdim());
  state.shat = sdim() > 0 ? Eigen::VectorXd(x.segment(zdim(), sdim())) : Eigen::VectorXd();
  state.bhat = bdim() > 0 ? Eigen::VectorXd(x.tail(bdim())) : Eigen::VectorXd();
}

ObserverState ImmersedObserver::init_from_group(const GroupElement& chi0) const {
  return init_from_immersed(model_.immerse_z(chi0));
}

ObserverState ImmersedObserver::init_from_immersed(const Eigen::VectorXd& zhat0) const {
  if (zhat0.size() != zdim()) {
    throw std::invalid_argument("init_from_immersed: wrong state length");
  }
  ObserverState s;
  s.zhat = zhat0;
  s.shat = model_.s_from_z(zhat0);
  s.bhat = Eigen::VectorXd::Zero(bdim());
  if (cfg_.b0.size() > 0) {
    if (cfg_.b0.size() != bdim()) {
      throw std::invalid_argument("ObserverConfig: b0 has wrong length");
    }
    s.bhat = cfg_.b0;
  }
  const double ps = cfg_.p0_s > 0.0 ? cfg_.p0_s : cfg_.p0;
  const double pb = cfg_.p0_b > 0.0 ? cfg_.p0_b : cfg_.p0;
  Eigen::VectorXd diag(xdim());
  diag.head(zdim()).setConstant(cfg_.p0);
  if (sdim() > 0) diag.segment(zdim(), sdim()).setConstant(ps);
  if (bdim() > 0) diag.tail(bdim()).setConstant(pb);
  s.riccati.P = diag.asDiagonal();
  s.riccati.t = 0.0;
  s.t = 0.0;
  return s;
}

void ImmersedObserver::measurement_model(const MeasurementBatch& batch, Eigen::MatrixXd& H,
                                         Eigen::VectorXd& y, Eigen::MatrixXd& R) const {
  const auto& spec = model_.spec;
  const int d = spec.d;
  if (static_cast<int>(batch.channels.size()) != spec.measurement_count()) {
    throw std::invalid_argument("measurement_model: batch size mismatch");
  }

  int rows = 0;
  for (const auto& meas : spec.measurements) {
    rows += (meas.kind == MeasurementKind::Range) ? 1 : d;
  }
  H = Eigen::MatrixXd::Zero(rows, xdim());
  y = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd rdiag = Eigen::VectorXd::Ones(rows);

  int row = 0;
  int range_ordinal = 0;
  for (int i = 0; i < spec.measurement_count(); ++i) {
    const auto& meas = spec.measurements[i];
    const auto& chan = batch.channels[i];
    switch (meas.kind) {
      case MeasurementKind::Landmark: {
        rdiag.segment(row, d).setConstant(cfg_.r_landmark);
        if (chan.valid && chan.value.size() == d) {
          const SlotRef ref = model_.red.map[i][0];
          if (ref.slot >= 0) {
            H.block(row, ref.slot * d, d, d) =
                ref.scale * Eigen::MatrixXd::Identity(d, d);
          }
          y.segment(row, d) = chan.value;
        }
        row += d;
        break;
      }
      case MeasurementKind::Bearing: {
        rdiag.segment(row, d).setConstant(cfg_.r_bearing);
        const bool usable = chan.valid && chan.value.size() == d &&
                            chan.value.norm() >= kBearingMinNorm &&
                            std::abs(chan.value.norm() - 1.0) <= 1e-6;
        if (usable) {
          const SlotRef ref = model_.red.map[i][0];
          if (ref.slot >= 0) {
            H.block(row, ref.slot * d, d, d) =
                ref.scale * bearing_projector(chan.value);
          }
          // virtual measurement is zero
        }
        row += d;
        break;
      }
      case MeasurementKind::Range: {
        const double yv = (chan.valid && chan.value.size() == 1) ? chan.value(0) : -1.0;
        if (yv >= 0.0) {
          H(row, zdim() + model_.s_index(range_ordinal, 0, 0)) = 1.0;
          y(row) = range_virtual_measurement(yv);
          rdiag(row) = range_measurement_variance(yv, cfg_.r_range);
        } else {
          rdiag(row) = range_measurement_variance(0.0, cfg_.r_range);
        }
        row += 1;
        ++range_ordinal;
        break;
      }
    }
  }
  R = rdiag.asDiagonal();
}

void ImmersedObserver::extended_system(const AlgebraElement& u, const Eigen::VectorXd& x,
                                       Eigen::MatrixXd& F, Eigen::VectorXd& c) const {
  const auto& spec = model_.spec;
  const int d = spec.d;
  const int nm = spec.n + spec.m;
  const double sgn = (spec.system_case == SystemCase::Case1) ? -1.0 : 1.0;
  const bool full = cfg_.bias_mode == BiasMode::Full;

  AlgebraElement u_eff = u;
  if (bdim() > 0) {
    const Eigen::VectorXd b = x.tail(bdim());
    int off = 0;
    if (full) {
      u_eff.omega += b.head(so_dim(d));
      off = so_dim(d);
    }
    for (int col = 0; col < nm; ++col) {
      u_eff.rho.col(col) += b.segment(off + col * d, d);
    }
  }

  F = Eigen::MatrixXd::Zero(xdim(), xdim());
  c = Eigen::VectorXd::Zero(xdim());

  Eigen::MatrixXd Fz;
  Eigen::VectorXd Cz;
  model_.z_matrices(u_eff, Fz, Cz);
  F.topLeftCorner(zdim(), zdim()) = Fz;
  c.head(zdim()) = Cz;

  if (sdim() > 0) {
    Eigen::MatrixXd A_ss, G_sz;
    model_.s_matrices(u_eff.rho, A_ss, G_sz);
    F.block(zdim(), zdim(), sdim(), sdim()) = A_ss;
    F.block(zdim(), 0, sdim(), zdim()) = G_sz;
  }

  if (bdim() > 0) {
    const int bcol = zdim() + sdim();
    for (int k = 0; k < model_.red.slots; ++k) {
      F.block(k * d, bcol, d, bdim()) =
          sgn * bias_dagger_rows(x.segment(k * d, d), model_.red.slot_underlined(k, d), d, full);
    }
    if (sdim() > 0) {
      // d(sdot)/d vec(b_rho): the quadratic terms only touch the rho part.
      const int rho_col = bcol + (full ? so_dim(d) : 0);
      const int N = model_.N();
      for (size_t r = 0; r < model_.range_meas.size(); ++r) {
        const int mi = model_.range_meas[r];
        for (int j = 0; j < N; ++j) {
          for (int k = j; k < N; ++k) {
            const int row = zdim() + model_.s_index(static_cast<int>(r), j, k);
            const Eigen::VectorXd zj = model_.zbar_block(x.head(zdim()), mi, j);
            const Eigen::VectorXd zk = model_.zbar_block(x.head(zdim()), mi, k);
            for (int col = 0; col < nm; ++col) {
              F.block(row, rho_col + col * d, 1, d) +=
                  sgn * 0.5 *
                  (model_.table.underlined[mi][j](col) * zk.transpose() +
                   model_.table.underlined[mi][k](col) * zj.transpose());
            }
          }
        }
      }
    }
  }
}

namespace {

struct StageDerivative {
  Eigen::VectorXd xdot;
  Eigen::MatrixXd Pdot;
};

}  // namespace

ObserverState ImmersedObserver::step(const ObserverState& state, const AlgebraElement& u,
                                     const MeasurementBatch& batch, double h) const {
  Eigen::MatrixXd H, R;
  Eigen::VectorXd y;
  measurement_model(batch, H, y, R);

  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("observer step: R is not positive definite");
  }
  const Eigen::MatrixXd B = llt.solve(H).transpose();  // H^T R^-1, xdim x rows
  const Eigen::MatrixXd BH = B * H;

  const bool biased = cfg_.bias_mode != BiasMode::Off;
  Eigen::MatrixXd Q;
  if (!biased || cfg_.modified_q) {
    Eigen::VectorXd qdiag(xdim());
    const double qs = cfg_.q_s > 0.0 ? cfg_.q_s : cfg_.q;
    qdiag.head(zdim()).setConstant(cfg_.q);
    if (sdim() > 0) qdiag.segment(zdim(), sdim()).setConstant(qs);
    if (bdim() > 0) qdiag.tail(bdim()).setZero();
    if (biased) qdiag *= cfg_.modified_q_scale;
    Q = qdiag.asDiagonal();
  }
  const double lambda = biased ? cfg_.lambda : 0.0;

  const Eigen::VectorXd x0 = pack(state);
  const int nb = bdim();

  // The measurement sample belongs to the step start; comparing it against
  // later stage states would inject a spurious O(h ydot) innovation, so the
  // innovation is evaluated once and held across the stages.
  const Eigen::VectorXd b_innov = cfg_.open_loop
                                      ? Eigen::VectorXd::Zero(xdim()).eval()
                                      : (B * (y - H * x0)).eval();

  auto derivative = [&](const Eigen::VectorXd& x, const Eigen::MatrixXd& P) {
    StageDerivative d;
    Eigen::MatrixXd F;
    Eigen::VectorXd c;
    extended_system(u, x, F, c);
    d.xdot = F * x + c;
    if (nb > 0) {
      // The bias columns of F belong to the linearization only; the plain
      // dynamics already carries bhat inside the effective input.
      d.xdot -= F.rightCols(nb) * x.tail(nb);
    }
    if (!cfg_.open_loop) {
      d.xdot += P * b_innov;
    }
    d.Pdot = F * P;
    d.Pdot += d.Pdot.transpose().eval();
    if (Q.size() > 0) d.Pdot += Q;
    if (lambda != 0.0) d.Pdot += lambda * P;
    d.Pdot -= P * BH * P;
    return d;
  };

  const Eigen::MatrixXd& P0 = state.riccati.P;
  const StageDerivative k1 = derivative(x0, P0);
  const StageDerivative k2 = derivative(x0 + 0.5 * h * k1.xdot, P0 + 0.5 * h * k1.Pdot);
  const StageDerivative k3 = derivative(x0 + 0.5 * h * k2.xdot, P0 + 0.5 * h * k2.Pdot);
  const StageDerivative k4 = derivative(x0 + h * k3.xdot, P0 + h * k3.Pdot);

  ObserverState out = state;
  const Eigen::VectorXd x1 =
      x0 + (h / 6.0) * (k1.xdot + 2.0 * k2.xdot + 2.0 * k3.xdot + k4.xdot);
  unpack(x1, out);
  if (cfg_.open_loop) {
    out.riccati = state.riccati;
    out.riccati.t += h;
  } else {
    out.riccati.P = P0 + (h / 6.0) * (k1.Pdot + 2.0 * k2.Pdot + 2.0 * k3.Pdot + k4.Pdot);
    enforce_spd_floor(out.riccati.P);
    out.riccati.t = state.riccati.t + h;
  }
  out.t = state.t + h;
  return out;
}

Eigen::VectorXd ImmersedObserver::innovation(const ObserverState& state,
                                             const MeasurementBatch& batch) const {
  Eigen::MatrixXd H, R;
  Eigen::VectorXd y;
  measurement_model(batch, H, y, R);
  return y - H * pack(state);
}

ReconstructionResult ImmersedObserver::reconstruct(const ObserverState& state) const {
  ReconstructionProblem problem;
  problem.Zbar = model_.zbar_matrix(state.zhat);
  problem.Dbar = model_.table.Dbar;
  problem.Dunder = model_.table.Dunder;
  if (cfg_.sigma_diag.size() > 0) {
    if (cfg_.sigma_diag.size() != model_.M() * model_.N()) {
      throw std::invalid_argument("ObserverConfig: sigma_diag has wrong length");
    }
    if (cfg_.sigma_diag.minCoeff() <= 0.0) {
      throw std::invalid_argument("ObserverConfig: sigma_diag must be positive");
    }
    problem.Sigma = cfg_.sigma_diag.asDiagonal();
  }
  problem.system_case = model_.spec.system_case;
  problem.n = model_.spec.n;
  problem.m = model_.spec.m;
  return umeyama_solve(problem);
}

ObserverState observer_step_bias_free(const ImmersedObserver& obs, const ObserverState& state,
                                      const AlgebraElement& u, const MeasurementBatch& batch,
                                      double h) {
  if (obs.config().bias_mode != BiasMode::Off) {
    throw std::invalid_argument("observer_step_bias_free: observer is in bias mode");
  }
  return obs.step(state, u, batch, h);
}

ObserverState observer_step_biased(const ImmersedObserver& obs, const ObserverState& state,
                                   const AlgebraElement& u, const MeasurementBatch& batch,
                                   double h) {
  if (obs.config().bias_mode == BiasMode::Off) {
    throw std::invalid_argument("observer_step_biased: observer is not in bias mode");
  }
  return obs.step(state, u, batch, h);
}

}  // namespace groupobs
