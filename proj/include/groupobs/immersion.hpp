#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "groupobs/groups.hpp"

namespace groupobs {

/// Case 1: left-invariant input field, right-action outputs y = T^-1 d.
/// Case 2: right-invariant input field, left-action outputs y = T d.
enum class SystemCase { Case1, Case2 };

enum class MeasurementKind { Landmark, Bearing, Range };

struct MeasurementSpec {
  MeasurementKind kind = MeasurementKind::Landmark;
  Eigen::VectorXd direction;  // homogeneous, length d+n+m
  double noise_std = 0.0;
};

/// A linear observed system on TFG(d,n,m): case tag, group dimensions, the
/// constant sim-algebra generator and the measurement directions.
struct SystemSpec {
  SystemCase system_case = SystemCase::Case1;
  int d = 3;
  int n = 0;
  int m = 0;
  SimAlgebraElement generator;
  std::vector<MeasurementSpec> measurements;

  int ambient() const { return d + n + m; }
  int measurement_count() const { return static_cast<int>(measurements.size()); }
  void validate() const;  // throws invalid_argument on inconsistent dimensions
};

/// Direction table d_j^(i) = A^j d^(i), split into barred (physical d-vector)
/// and underlined (homogeneous) parts, plus the stacked matrices and the rank
/// data used by the GES eligibility check.
struct DirectionTable {
  int d = 0, n = 0, m = 0, M = 0, N = 0;
  std::vector<std::vector<Eigen::VectorXd>> barred;      // [M][N], d-vectors
  std::vector<std::vector<Eigen::VectorXd>> underlined;  // [M][N], (n+m)-vectors
  Eigen::MatrixXd D;       // N x (M*N), column (i,j) at i*N+j
  Eigen::MatrixXd Dbar;    // d x (M*N)
  Eigen::MatrixXd Dunder;  // (n+m) x (M*N)
  int rank = 0;
  double sigma_min = 0.0;  // smallest singular value of D
  double sigma_max = 0.0;

  Eigen::VectorXd column(int i, int j) const { return D.col(i * N + j); }
};

/// Coefficients of A^N = sum_l a_l A^l obtained from the characteristic
/// polynomial. They close the immersed state chain.
struct CayleyCoefficients {
  Eigen::VectorXd a;       // length N
  double residual = 0.0;   // || A^N - sum a_l A^l ||_F
};

/// Faddeev-LeVerrier recursion for the characteristic polynomial of the
/// embedded generator, rearranged as A^N = sum_l a_l A^l.
CayleyCoefficients cayley_coefficients(const SimAlgebraElement& A);
CayleyCoefficients cayley_coefficients(const Eigen::MatrixXd& A);

DirectionTable direction_table(const SystemSpec& spec);

/// Barred immersed state of the unmerged reduced system: blocks (i asc, j asc),
/// z_bar_j^(i) = barred part of T^-1 d_j^(i) (Case 1) or T d_j^(i) (Case 2).
Eigen::VectorXd immerse(const GroupElement& T, const DirectionTable& table, SystemCase c);

/// Full homogeneous immersion (blocks of length N). Used to cross-validate the
/// general LTV builder and the underline stationarity property.
Eigen::VectorXd immerse_homogeneous(const GroupElement& T, const DirectionTable& table,
                                    SystemCase c);

struct LtvSystem {
  Eigen::MatrixXd F;
  Eigen::VectorXd C;
  Eigen::MatrixXd H;
};

/// General homogeneous form: block-diagonal companion-style F over the M
/// chains of N blocks of size N, H selecting the leading homogeneous block,
/// C = 0.
LtvSystem build_ltv_general(const AlgebraElement& u, const SystemSpec& spec,
                            const CayleyCoefficients& coeffs);

/// TFG-reduced form on the barred states (M*N blocks of size d).
LtvSystem build_ltv_tfg(const AlgebraElement& u, const SystemSpec& spec,
                        const DirectionTable& table, const CayleyCoefficients& coeffs);

/// Maps chain position (i,j) to a merged state slot. Identically-zero defining
/// columns carry slot = -1 (their immersed state is identically zero and is
/// dropped). For proportional columns the recorded scale satisfies
/// d_j^(i) = scale * slot_column.
struct SlotRef {
  int slot = -1;
  double scale = 0.0;
};

struct StateReduction {
  bool merged = false;
  int slots = 0;
  std::vector<std::vector<SlotRef>> map;  // [M][N]
  Eigen::MatrixXd slot_columns;           // N x slots, homogeneous defining columns
  // Successor expression per slot: A * c_k = sum coeff * c_l over (l, coeff).
  std::vector<std::vector<std::pair<int, double>>> successors;

  Eigen::VectorXd slot_barred(int k, int d) const { return slot_columns.col(k).head(d); }
  Eigen::VectorXd slot_underlined(int k, int d) const {
    return slot_columns.col(k).tail(slot_columns.rows() - d);
  }
};

/// Shared-state reduction: immersed blocks whose defining columns agree up to
/// a scalar factor are represented by one state copy. With merge = false every
/// (i,j) keeps its own slot and the assembled system equals build_ltv_tfg.
StateReduction shared_state_reduction(const SystemSpec& spec, const DirectionTable& table,
                                      const CayleyCoefficients& coeffs, bool merge);

/// Immersed model: everything derived from a SystemSpec that the observer and
/// the scenarios need, including the slot-level system assembly and the range
/// augmentation blocks.
struct ImmersedModel {
  SystemSpec spec;
  DirectionTable table;
  CayleyCoefficients coeffs;
  StateReduction red;
  std::vector<int> range_meas;  // measurement indices of kind Range

  static ImmersedModel Build(const SystemSpec& spec, bool shared_reduction);

  int d() const { return spec.d; }
  int N() const { return spec.ambient(); }
  int M() const { return spec.measurement_count(); }
  int zdim() const { return red.slots * spec.d; }
  int pairs_per_range() const { return N() * (N() + 1) / 2; }
  int sdim() const { return static_cast<int>(range_meas.size()) * pairs_per_range(); }

  /// Index of s_{j,k} (j <= k) within the stacked s-vector.
  int s_index(int range_ordinal, int j, int k) const;

  /// Slot-level dynamics matrices for the barred subsystem at input u.
  void z_matrices(const AlgebraElement& u, Eigen::MatrixXd& Fz, Eigen::VectorXd& Cz) const;

  /// Range-augmentation dynamics: sdot = A_ss * s + G_sz * z for the effective
  /// rho (input plus estimated bias).
  void s_matrices(const Eigen::MatrixXd& rho_eff, Eigen::MatrixXd& A_ss,
                  Eigen::MatrixXd& G_sz) const;

  /// Slot-level immersion of a group state.
  Eigen::VectorXd immerse_z(const GroupElement& T) const;

  /// s initialized consistently from a z vector: s_{j,k} = z_bar_j . z_bar_k / 2.
  Eigen::VectorXd s_from_z(const Eigen::VectorXd& z) const;

  /// Chain block z_bar_j^(i) recovered from the slot vector (zero for dropped
  /// columns).
  Eigen::VectorXd zbar_block(const Eigen::VectorXd& z, int i, int j) const;

  /// d x (M*N) matrix of estimated barred blocks in reconstruction column order.
  Eigen::MatrixXd zbar_matrix(const Eigen::VectorXd& z) const;

  /// Static landmark-style measurement matrix (M*d x zdim): block row i selects
  /// scale * slot(i,0). Bearing and range channels override rows per step.
  Eigen::MatrixXd landmark_H() const;
};

/// App.-style range augmentation right-hand side on chain i (all (j,k) pairs of
/// one range measurement), exposed for the finite-difference oracles.
Eigen::VectorXd range_augmentation_rhs(const ImmersedModel& model,
                                       const Eigen::VectorXd& zhat,
                                       const Eigen::VectorXd& shat,
                                       const Eigen::MatrixXd& rho_eff);

}  // namespace groupobs
