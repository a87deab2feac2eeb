#pragma once

#include <vector>

#include <Eigen/Dense>

#include "groupobs/immersion.hpp"
#include "groupobs/reconstruct.hpp"
#include "groupobs/riccati.hpp"

namespace groupobs {

enum class BiasMode { Off, RhoOnly, Full };

/// One sample of every measurement channel: d-vector for landmarks, unit
/// d-vector for bearings, nonnegative scalar for ranges. Channels flagged
/// invalid are skipped for the step.
struct MeasurementBatch {
  struct Channel {
    Eigen::VectorXd value;
    bool valid = true;
  };
  std::vector<Channel> channels;
};

struct ObserverConfig {
  double q = 1.0;            // process weight: Q = q I on the z block
  double q_s = -1.0;         // s-block process weight (negative = use q)
  double r_landmark = 1e-2;  // per-channel measurement weights
  double r_bearing = 1e-2;
  double r_range = 1e-2;
  double lambda = 0.1;       // forgetting factor of the modified Riccati equation
  double p0 = 1.0;           // initial covariance scales
  double p0_s = -1.0;        // (negative = use p0)
  double p0_b = -1.0;
  BiasMode bias_mode = BiasMode::Off;
  bool modified_q = false;   // mix a small Q into the modified equation
  double modified_q_scale = 1e-6;
  bool open_loop = false;      // force K = 0 (pure prediction)
  Eigen::VectorXd b0;          // initial bias estimate (empty = zero)
  Eigen::VectorXd sigma_diag;  // diagonal reconstruction weight (empty = identity);
                               // full SPD weights go through ReconstructionProblem
};

struct ObserverState {
  Eigen::VectorXd zhat;  // slot-level barred immersed estimate
  Eigen::VectorXd shat;  // range-augmentation scalars (present iff ranges exist)
  Eigen::VectorXd bhat;  // bias estimate per mode ([b_omega;] vec(b_rho))
  RiccatiState riccati;  // covariance of the extended state
  double t = 0.0;
};

/// L-dagger rows of one immersed block: J * (b_omega, vec(b_rho)) equals
/// hat(b_omega) * zbar + b_rho * dunder. vec(b_rho) is column-major.
Eigen::MatrixXd bias_dagger_rows(const Eigen::VectorXd& zbar, const Eigen::VectorXd& dunder,
                                 int d, bool include_omega);

/// Stacked L-dagger rows over all (i,j) blocks of an unmerged immersed state.
Eigen::MatrixXd bias_jacobian(const Eigen::VectorXd& z_unmerged, const DirectionTable& table,
                              bool include_omega = true);

/// Orthogonal projector I - y y^T used to linearize bearing measurements.
/// The input is normalized first; callers guard the near-zero case.
Eigen::MatrixXd bearing_projector(const Eigen::VectorXd& ybar);

/// Half-square transform of a range value and its first-order noise variance.
double range_virtual_measurement(double y);
double range_measurement_variance(double y, double r_range);

/// Continuous-time observer for the immersed system: Kalman gain from the
/// standard Riccati equation in bias-free mode, from the modified equation
/// (forgetting factor lambda) when input biases are estimated. The state and
/// the covariance advance within one RK4 step; measurements are held over the
/// step.
class ImmersedObserver {
 public:
  ImmersedObserver(ImmersedModel model, ObserverConfig cfg);

  const ImmersedModel& model() const { return model_; }
  const ObserverConfig& config() const { return cfg_; }

  int zdim() const { return model_.zdim(); }
  int sdim() const { return model_.sdim(); }
  int bdim() const;
  int xdim() const { return zdim() + sdim() + bdim(); }

  ObserverState init_from_group(const GroupElement& chi0) const;
  ObserverState init_from_immersed(const Eigen::VectorXd& zhat0) const;

  ObserverState step(const ObserverState& state, const AlgebraElement& u,
                     const MeasurementBatch& batch, double h) const;

  Eigen::VectorXd innovation(const ObserverState& state, const MeasurementBatch& batch) const;

  ReconstructionResult reconstruct(const ObserverState& state) const;

  /// Measurement model on the extended state for the current batch; bearing
  /// rows carry the projector, range rows select s_{0,0}. Invalid or
  /// degenerate channels produce zero rows.
  void measurement_model(const MeasurementBatch& batch, Eigen::MatrixXd& H,
                         Eigen::VectorXd& y, Eigen::MatrixXd& R) const;

  /// Extended Jacobian (the gain-computation F) and affine term at the given
  /// state. The bias columns hold the L-dagger blocks; the plain dynamics is
  /// F x + c minus those columns times bhat.
  void extended_system(const AlgebraElement& u, const Eigen::VectorXd& x,
                       Eigen::MatrixXd& F, Eigen::VectorXd& c) const;

  Eigen::VectorXd pack(const ObserverState& state) const;
  void unpack(const Eigen::VectorXd& x, ObserverState& state) const;

 private:
  ImmersedModel model_;
  ObserverConfig cfg_;
};

ObserverState observer_step_bias_free(const ImmersedObserver& obs, const ObserverState& state,
                                      const AlgebraElement& u, const MeasurementBatch& batch,
                                      double h);
ObserverState observer_step_biased(const ImmersedObserver& obs, const ObserverState& state,
                                   const AlgebraElement& u, const MeasurementBatch& batch,
                                   double h);

}  // namespace groupobs
