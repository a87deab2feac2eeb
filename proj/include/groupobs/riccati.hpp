#pragma once

#include <deque>
#include <utility>

#include <Eigen/Dense>

#include "groupobs/tolerances.hpp"

namespace groupobs {

/// Covariance-like state of the gain computation. P is kept symmetric with
/// eigenvalues floored at kPFloor after every step.
struct RiccatiState {
  Eigen::MatrixXd P;
  double t = 0.0;
};

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M);

/// Symmetrize, then clamp eigenvalues from below. Uses a Cholesky probe first
/// so the eigen decomposition only runs when the floor is actually violated.
void enforce_spd_floor(Eigen::MatrixXd& P, double floor = kPFloor);

/// One RK4 step of Pdot = F P + P F^T + Q - P H^T R^-1 H P.
RiccatiState riccati_step(const RiccatiState& s, const Eigen::MatrixXd& F,
                          const Eigen::MatrixXd& H, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R, double h);

/// One RK4 step of the modified equation Pdot = lambda P + F P + P F^T
/// - P H^T R^-1 H P (no process term). An optional Q can be mixed back in for
/// conditioning experiments.
RiccatiState modified_riccati_step(const RiccatiState& s, const Eigen::MatrixXd& F,
                                   const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                                   double lambda, double h,
                                   const Eigen::MatrixXd* Q = nullptr);

/// K = P H^T R^-1.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& R);

/// Sliding window of (F_t, H_t^T R^-1 H_t) samples on the integrator grid,
/// from which the observability and determinability Gramians are evaluated by
/// trapezoidal quadrature with RK4 transition matrices.
class GramianWindow {
 public:
  GramianWindow() = default;
  GramianWindow(double delta, double h);

  void push(const Eigen::MatrixXd& F, const Eigen::MatrixXd& weight);
  bool full() const { return capacity_ > 0 && F_.size() >= capacity_; }
  std::size_t size() const { return F_.size(); }
  double delta() const { return delta_; }
  double step() const { return h_; }

  /// Gramian anchored at the window start; returns (matrix, lambda_min).
  std::pair<Eigen::MatrixXd, double> observability() const;

  /// Gramian anchored at the window end.
  std::pair<Eigen::MatrixXd, double> determinability() const;

 private:
  double delta_ = 0.0;
  double h_ = 0.0;
  std::size_t capacity_ = 0;
  std::deque<Eigen::MatrixXd> F_;
  std::deque<Eigen::MatrixXd> weight_;
};

}  // namespace groupobs
