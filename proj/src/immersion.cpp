#include "groupobs/immersion.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace groupobs {

void SystemSpec::validate() const {
  if (d != 2 && d != 3) throw std::invalid_argument("SystemSpec: d must be 2 or 3");
  if (n < 0 || m < 0) throw std::invalid_argument("SystemSpec: negative vector counts");
  if (ambient() < 2) throw std::invalid_argument("SystemSpec: ambient dimension must be >= 2");
  if (generator.d != d || generator.n != n || generator.m != m) {
    throw std::invalid_argument("SystemSpec: generator dimensions disagree");
  }
  if (measurements.empty()) throw std::invalid_argument("SystemSpec: no measurements");
  for (const auto& meas : measurements) {
    if (meas.direction.size() != ambient()) {
      throw std::invalid_argument("SystemSpec: measurement direction has wrong length");
    }
  }
}

CayleyCoefficients cayley_coefficients(const SimAlgebraElement& A) {
  return cayley_coefficients(A.embed());
}

CayleyCoefficients cayley_coefficients(const Eigen::MatrixXd& Ae) {
  if (Ae.rows() != Ae.cols() || Ae.rows() < 1) {
    throw std::invalid_argument("cayley_coefficients: square matrix expected");
  }
  const int N = static_cast<int>(Ae.rows());

  // Faddeev-LeVerrier: char(lambda) = lambda^N + c_{N-1} lambda^{N-1} + ... + c_0.
  Eigen::VectorXd c(N);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N);
  for (int k = 1; k <= N; ++k) {
    const Eigen::MatrixXd AM = Ae * M;
    const double ck = -AM.trace() / static_cast<double>(k);
    c(N - k) = ck;
    M = AM + ck * Eigen::MatrixXd::Identity(N, N);
  }

  CayleyCoefficients out;
  out.a = -c;  // A^N = sum_l a_l A^l

  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(N, N);
  for (int l = 0; l < N; ++l) {
    sum += out.a(l) * power;
    power = power * Ae;
  }
  out.residual = (power - sum).norm();  // power is now A^N
  return out;
}

DirectionTable direction_table(const SystemSpec& spec) {
  spec.validate();
  DirectionTable t;
  t.d = spec.d;
  t.n = spec.n;
  t.m = spec.m;
  t.M = spec.measurement_count();
  t.N = spec.ambient();

  const Eigen::MatrixXd Omega_hat = hat(spec.generator.Omega, spec.d);
  const int nm = spec.n + spec.m;

  t.barred.assign(t.M, {});
  t.underlined.assign(t.M, {});
  t.D.resize(t.N, t.M * t.N);
  t.Dbar.resize(t.d, t.M * t.N);
  t.Dunder.resize(nm, t.M * t.N);

  for (int i = 0; i < t.M; ++i) {
    t.barred[i].resize(t.N);
    t.underlined[i].resize(t.N);
    t.barred[i][0] = spec.measurements[i].direction.head(spec.d);
    t.underlined[i][0] = spec.measurements[i].direction.tail(nm);
    for (int j = 1; j < t.N; ++j) {
      t.underlined[i][j] = spec.generator.L * t.underlined[i][j - 1];
      t.barred[i][j] = Omega_hat * t.barred[i][j - 1] + spec.generator.gamma * t.underlined[i][j - 1];
    }
    for (int j = 0; j < t.N; ++j) {
      const int col = i * t.N + j;
      t.Dbar.col(col) = t.barred[i][j];
      t.Dunder.col(col) = t.underlined[i][j];
      t.D.col(col).head(spec.d) = t.barred[i][j];
      t.D.col(col).tail(nm) = t.underlined[i][j];
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t.D);
  const Eigen::VectorXd sv = svd.singularValues();
  t.sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  t.sigma_min = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  t.rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > kRankRelTol * t.sigma_max) ++t.rank;
  }
  return t;
}

namespace {

Eigen::VectorXd barred_action(const GroupElement& T, const Eigen::VectorXd& dbar,
                              const Eigen::VectorXd& dunder, SystemCase c) {
  if (c == SystemCase::Case1) {
    return T.R.transpose() * (dbar - T.W * dunder);
  }
  return T.R * dbar + T.W * dunder;
}

}  // namespace

Eigen::VectorXd immerse(const GroupElement& T, const DirectionTable& table, SystemCase c) {
  Eigen::VectorXd z(table.M * table.N * table.d);
  for (int i = 0; i < table.M; ++i) {
    for (int j = 0; j < table.N; ++j) {
      z.segment((i * table.N + j) * table.d, table.d) =
          barred_action(T, table.barred[i][j], table.underlined[i][j], c);
    }
  }
  return z;
}

Eigen::VectorXd immerse_homogeneous(const GroupElement& T, const DirectionTable& table,
                                    SystemCase c) {
  const int N = table.N;
  Eigen::VectorXd z(table.M * N * N);
  const ActionSide side = (c == SystemCase::Case1) ? ActionSide::Inverse : ActionSide::Left;
  for (int i = 0; i < table.M; ++i) {
    for (int j = 0; j < N; ++j) {
      z.segment((i * N + j) * N, N) = act(T, table.column(i, j), side);
    }
  }
  return z;
}

LtvSystem build_ltv_general(const AlgebraElement& u, const SystemSpec& spec,
                            const CayleyCoefficients& coeffs) {
  const int N = spec.ambient();
  const int M = spec.measurement_count();
  const int nm = spec.n + spec.m;

  Eigen::MatrixXd Su(N, N);
  Su.setZero();
  if (spec.system_case == SystemCase::Case1) {
    Su.topLeftCorner(spec.d, spec.d) = hat(u.omega, spec.d);
    Su.topRightCorner(spec.d, nm) = u.rho;
  } else {
    Su.topLeftCorner(spec.d, spec.d) = -hat(u.omega, spec.d);
    Su.topRightCorner(spec.d, nm) = -u.rho;
  }
  Su.bottomRightCorner(nm, nm) = -spec.generator.L;

  Eigen::MatrixXd Fblock = Eigen::MatrixXd::Zero(N * N, N * N);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  for (int j = 0; j < N; ++j) {
    Fblock.block(j * N, j * N, N, N) = -Su;
    if (j + 1 < N) {
      Fblock.block(j * N, (j + 1) * N, N, N) = -I;
    }
  }
  for (int l = 0; l < N; ++l) {
    Fblock.block((N - 1) * N, l * N, N, N) -= coeffs.a(l) * I;
  }

  LtvSystem sys;
  sys.F = Eigen::MatrixXd::Zero(M * N * N, M * N * N);
  sys.H = Eigen::MatrixXd::Zero(M * N, M * N * N);
  sys.C = Eigen::VectorXd::Zero(M * N * N);
  for (int i = 0; i < M; ++i) {
    sys.F.block(i * N * N, i * N * N, N * N, N * N) = Fblock;
    sys.H.block(i * N, i * N * N, N, N) = I;
  }
  return sys;
}

StateReduction shared_state_reduction(const SystemSpec&, const DirectionTable& table,
                                      const CayleyCoefficients& coeffs, bool merge) {
  const int M = table.M;
  const int N = table.N;

  StateReduction red;
  red.merged = merge;
  red.map.assign(M, std::vector<SlotRef>(N));

  std::vector<Eigen::VectorXd> cols;
  std::vector<std::pair<int, int>> representative;  // first (i,j) per slot

  double colmax = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) colmax = std::max(colmax, table.column(i, j).norm());
  const double zero_tol = kExactTol * std::max(1.0, colmax);

  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      const Eigen::VectorXd col = table.column(i, j);
      if (merge && col.norm() <= zero_tol) {
        red.map[i][j] = SlotRef{-1, 0.0};
        continue;
      }
      int found = -1;
      double scale = 1.0;
      if (merge) {
        for (size_t k = 0; k < cols.size(); ++k) {
          const double denom = cols[k].squaredNorm();
          const double s = cols[k].dot(col) / denom;
          if ((col - s * cols[k]).norm() <= kExactTol * std::max(1.0, col.norm())) {
            found = static_cast<int>(k);
            scale = s;
            break;
          }
        }
      }
      if (found < 0) {
        found = static_cast<int>(cols.size());
        cols.push_back(col);
        representative.emplace_back(i, j);
        scale = 1.0;
      }
      red.map[i][j] = SlotRef{found, scale};
    }
  }

  red.slots = static_cast<int>(cols.size());
  red.slot_columns.resize(N, red.slots);
  for (int k = 0; k < red.slots; ++k) red.slot_columns.col(k) = cols[k];

  // Successor expression per slot, derived from its first representative.
  // Interior chain positions continue to the next column; the terminal
  // position closes through the Cayley-Hamilton combination.
  red.successors.assign(red.slots, {});
  for (int k = 0; k < red.slots; ++k) {
    const auto [i, j] = representative[k];
    const double own_scale = red.map[i][j].scale;
    std::map<int, double> expr;
    if (j + 1 < N) {
      const SlotRef nxt = red.map[i][j + 1];
      if (nxt.slot >= 0) expr[nxt.slot] += nxt.scale / own_scale;
    } else {
      for (int l = 0; l < N; ++l) {
        if (coeffs.a(l) == 0.0) continue;
        const SlotRef ref = red.map[i][l];
        if (ref.slot >= 0) expr[ref.slot] += coeffs.a(l) * ref.scale / own_scale;
      }
    }
    for (const auto& [slot, coeff] : expr) {
      if (std::abs(coeff) > 0.0) red.successors[k].emplace_back(slot, coeff);
    }
  }
  return red;
}

LtvSystem build_ltv_tfg(const AlgebraElement& u, const SystemSpec& spec,
                        const DirectionTable& table, const CayleyCoefficients& coeffs) {
  ImmersedModel model;
  model.spec = spec;
  model.table = table;
  model.coeffs = coeffs;
  model.red = shared_state_reduction(spec, table, coeffs, /*merge=*/false);

  LtvSystem sys;
  model.z_matrices(u, sys.F, sys.C);
  sys.H = model.landmark_H();
  return sys;
}

ImmersedModel ImmersedModel::Build(const SystemSpec& spec, bool shared_reduction) {
  spec.validate();
  ImmersedModel model;
  model.spec = spec;
  model.table = direction_table(spec);
  model.coeffs = cayley_coefficients(spec.generator);
  model.red = shared_state_reduction(spec, model.table, model.coeffs, shared_reduction);
  for (int i = 0; i < spec.measurement_count(); ++i) {
    if (spec.measurements[i].kind == MeasurementKind::Range) model.range_meas.push_back(i);
  }
  return model;
}

int ImmersedModel::s_index(int range_ordinal, int j, int k) const {
  const int N = this->N();
  // pairs ordered (0,0),(0,1),...,(0,N-1),(1,1),...,(N-1,N-1)
  return range_ordinal * pairs_per_range() + j * N - j * (j - 1) / 2 + (k - j);
}

void ImmersedModel::z_matrices(const AlgebraElement& u, Eigen::MatrixXd& Fz,
                               Eigen::VectorXd& Cz) const {
  const int d = spec.d;
  const int K = red.slots;
  const double sgn = (spec.system_case == SystemCase::Case1) ? -1.0 : 1.0;
  const Eigen::MatrixXd rot = sgn * hat(u.omega, d);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  Fz = Eigen::MatrixXd::Zero(K * d, K * d);
  Cz = Eigen::VectorXd::Zero(K * d);
  for (int k = 0; k < K; ++k) {
    Fz.block(k * d, k * d, d, d) = rot;
    Cz.segment(k * d, d) = sgn * (u.rho * red.slot_underlined(k, d));
    for (const auto& [slot, coeff] : red.successors[k]) {
      Fz.block(k * d, slot * d, d, d) -= coeff * I;
    }
  }
}

void ImmersedModel::s_matrices(const Eigen::MatrixXd& rho_eff, Eigen::MatrixXd& A_ss,
                               Eigen::MatrixXd& G_sz) const {
  const int d = spec.d;
  const int N = this->N();
  const double sgn = (spec.system_case == SystemCase::Case1) ? -1.0 : 1.0;

  A_ss = Eigen::MatrixXd::Zero(sdim(), sdim());
  G_sz = Eigen::MatrixXd::Zero(sdim(), zdim());

  for (size_t r = 0; r < range_meas.size(); ++r) {
    const int mi = range_meas[r];
    const int ro = static_cast<int>(r);
    auto add_z_term = [&](int row, int dir_j, int state_j, double weight) {
      // weight * (rho * d_under_j)^T z_bar_{state_j} on this chain
      const SlotRef ref = red.map[mi][state_j];
      if (ref.slot < 0) return;
      const Eigen::VectorXd v = rho_eff * table.underlined[mi][dir_j];
      G_sz.block(row, ref.slot * d, 1, d) += weight * ref.scale * v.transpose();
    };
    auto s_at = [&](int j, int k) { return s_index(ro, std::min(j, k), std::max(j, k)); };

    for (int j = 0; j < N; ++j) {
      for (int k = j; k < N; ++k) {
        const int row = s_index(ro, j, k);
        if (j == N - 1 && k == N - 1) {
          add_z_term(row, N - 1, N - 1, sgn);
          for (int l = 0; l < N; ++l) {
            if (coeffs.a(l) != 0.0) A_ss(row, s_at(l, N - 1)) += 2.0 * sgn * coeffs.a(l);
          }
        } else if (k == N - 1) {
          add_z_term(row, j, N - 1, 0.5 * sgn);
          add_z_term(row, N - 1, j, 0.5 * sgn);
          A_ss(row, s_at(j + 1, N - 1)) += sgn;
          for (int l = 0; l < N; ++l) {
            if (coeffs.a(l) != 0.0) A_ss(row, s_at(j, l)) += sgn * coeffs.a(l);
          }
        } else {
          add_z_term(row, j, k, 0.5 * sgn);
          add_z_term(row, k, j, 0.5 * sgn);
          A_ss(row, s_at(j + 1, k)) += sgn;
          A_ss(row, s_at(j, k + 1)) += sgn;
        }
      }
    }
  }
}

Eigen::VectorXd ImmersedModel::immerse_z(const GroupElement& T) const {
  const int d = spec.d;
  Eigen::VectorXd z(zdim());
  for (int k = 0; k < red.slots; ++k) {
    z.segment(k * d, d) = barred_action(T, red.slot_barred(k, d), red.slot_underlined(k, d),
                                        spec.system_case);
  }
  return z;
}

Eigen::VectorXd ImmersedModel::s_from_z(const Eigen::VectorXd& z) const {
  Eigen::VectorXd s(sdim());
  const int N = this->N();
  for (size_t r = 0; r < range_meas.size(); ++r) {
    const int mi = range_meas[r];
    for (int j = 0; j < N; ++j) {
      for (int k = j; k < N; ++k) {
        s(s_index(static_cast<int>(r), j, k)) =
            0.5 * zbar_block(z, mi, j).dot(zbar_block(z, mi, k));
      }
    }
  }
  return s;
}

Eigen::VectorXd ImmersedModel::zbar_block(const Eigen::VectorXd& z, int i, int j) const {
  const SlotRef ref = red.map[i][j];
  if (ref.slot < 0) return Eigen::VectorXd::Zero(spec.d);
  return ref.scale * z.segment(ref.slot * spec.d, spec.d);
}

Eigen::MatrixXd ImmersedModel::zbar_matrix(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd Z(spec.d, M() * N());
  for (int i = 0; i < M(); ++i) {
    for (int j = 0; j < N(); ++j) {
      Z.col(i * N() + j) = zbar_block(z, i, j);
    }
  }
  return Z;
}

Eigen::MatrixXd ImmersedModel::landmark_H() const {
  const int d = spec.d;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(M() * d, zdim());
  for (int i = 0; i < M(); ++i) {
    const SlotRef ref = red.map[i][0];
    if (ref.slot < 0) continue;
    H.block(i * d, ref.slot * d, d, d) = ref.scale * Eigen::MatrixXd::Identity(d, d);
  }
  return H;
}

Eigen::VectorXd range_augmentation_rhs(const ImmersedModel& model, const Eigen::VectorXd& zhat,
                                       const Eigen::VectorXd& shat,
                                       const Eigen::MatrixXd& rho_eff) {
  Eigen::MatrixXd A_ss, G_sz;
  model.s_matrices(rho_eff, A_ss, G_sz);
  return A_ss * shat + G_sz * zhat;
}

}  // namespace groupobs
