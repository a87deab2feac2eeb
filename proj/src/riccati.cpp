#include "groupobs/riccati.hpp"

#include <cmath>
#include <stdexcept>

namespace groupobs {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

void enforce_spd_floor(Eigen::MatrixXd& P, double floor) {
  if (!P.allFinite()) {
    throw std::runtime_error(
        "covariance diverged (non-finite P); reduce the step size or the gains");
  }
  P = symmetrize(P);
  const int n = static_cast<int>(P.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(P - floor * Eigen::MatrixXd::Identity(n, n));
  if (llt.info() == Eigen::Success) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(floor);
  P = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  P = symmetrize(P);
}

namespace {

Eigen::MatrixXd riccati_rhs(const Eigen::MatrixXd& P, const Eigen::MatrixXd& F,
                            const Eigen::MatrixXd& HtRinvH, const Eigen::MatrixXd* Q,
                            double lambda) {
  Eigen::MatrixXd rhs = F * P;
  rhs += rhs.transpose().eval();
  if (Q != nullptr) rhs += *Q;
  if (lambda != 0.0) rhs += lambda * P;
  rhs -= P * HtRinvH * P;
  return rhs;
}

Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("riccati: R is not invertible (SPD required)");
  }
  return H.transpose() * llt.solve(H);
}

RiccatiState rk4_riccati(const RiccatiState& s, const Eigen::MatrixXd& F,
                         const Eigen::MatrixXd& HtRinvH, const Eigen::MatrixXd* Q,
                         double lambda, double h) {
  const Eigen::MatrixXd k1 = riccati_rhs(s.P, F, HtRinvH, Q, lambda);
  const Eigen::MatrixXd k2 = riccati_rhs(s.P + 0.5 * h * k1, F, HtRinvH, Q, lambda);
  const Eigen::MatrixXd k3 = riccati_rhs(s.P + 0.5 * h * k2, F, HtRinvH, Q, lambda);
  const Eigen::MatrixXd k4 = riccati_rhs(s.P + h * k3, F, HtRinvH, Q, lambda);
  RiccatiState out;
  out.P = s.P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.t = s.t + h;
  enforce_spd_floor(out.P);
  return out;
}

}  // namespace

RiccatiState riccati_step(const RiccatiState& s, const Eigen::MatrixXd& F,
                          const Eigen::MatrixXd& H, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R, double h) {
  const Eigen::MatrixXd W = weight_matrix(H, R);
  return rk4_riccati(s, F, W, &Q, 0.0, h);
}

RiccatiState modified_riccati_step(const RiccatiState& s, const Eigen::MatrixXd& F,
                                   const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                                   double lambda, double h, const Eigen::MatrixXd* Q) {
  const Eigen::MatrixXd W = weight_matrix(H, R);
  return rk4_riccati(s, F, W, Q, lambda, h);
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& R) {
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("kalman_gain: R is not invertible");
  }
  return P * H.transpose() * llt.solve(Eigen::MatrixXd::Identity(R.rows(), R.cols()));
}

GramianWindow::GramianWindow(double delta, double h) : delta_(delta), h_(h) {
  if (delta <= 0.0 || h <= 0.0) {
    throw std::invalid_argument("GramianWindow: delta and h must be positive");
  }
  capacity_ = static_cast<std::size_t>(std::lround(delta / h)) + 1;
}

void GramianWindow::push(const Eigen::MatrixXd& F, const Eigen::MatrixXd& weight) {
  F_.push_back(F);
  weight_.push_back(weight);
  while (F_.size() > capacity_) {
    F_.pop_front();
    weight_.pop_front();
  }
}

namespace {

// RK4 for Phi' = F(t) Phi over one grid interval, with F interpolated at the
// midpoint.
Eigen::MatrixXd advance_transition(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& F0,
                                   const Eigen::MatrixXd& F1, double h) {
  const Eigen::MatrixXd Fm = 0.5 * (F0 + F1);
  const Eigen::MatrixXd k1 = F0 * Phi;
  const Eigen::MatrixXd k2 = Fm * (Phi + 0.5 * h * k1);
  const Eigen::MatrixXd k3 = Fm * (Phi + 0.5 * h * k2);
  const Eigen::MatrixXd k4 = F1 * (Phi + h * k3);
  return Phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::pair<Eigen::MatrixXd, double> GramianWindow::observability() const {
  if (F_.empty()) {
    throw std::invalid_argument("GramianWindow: empty window");
  }
  const int n = static_cast<int>(F_.front().rows());
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd integrand_prev = weight_.front();
  for (std::size_t k = 1; k < F_.size(); ++k) {
    Phi = advance_transition(Phi, F_[k - 1], F_[k], h_);
    const Eigen::MatrixXd integrand = Phi.transpose() * weight_[k] * Phi;
    G += (h_ / 2.0) * (integrand_prev + integrand);
    integrand_prev = integrand;
  }
  G = symmetrize(G);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  return {G, eig.eigenvalues()(0)};
}

std::pair<Eigen::MatrixXd, double> GramianWindow::determinability() const {
  if (F_.empty()) {
    throw std::invalid_argument("GramianWindow: empty window");
  }
  const int n = static_cast<int>(F_.front().rows());
  // D(t2,t1) = Phi(t2,t1)^-T O(t2,t1) Phi(t2,t1)^-1
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd integrand_prev = weight_.front();
  for (std::size_t k = 1; k < F_.size(); ++k) {
    Phi = advance_transition(Phi, F_[k - 1], F_[k], h_);
    const Eigen::MatrixXd integrand = Phi.transpose() * weight_[k] * Phi;
    G += (h_ / 2.0) * (integrand_prev + integrand);
    integrand_prev = integrand;
  }
  const Eigen::MatrixXd X = Phi.partialPivLu().inverse();
  Eigen::MatrixXd D = symmetrize(X.transpose() * G * X);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
  return {D, eig.eigenvalues()(0)};
}

}  // namespace groupobs
