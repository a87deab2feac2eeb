#include "groupobs/groups.hpp"

#include <cmath>
#include <stdexcept>

namespace groupobs {

Eigen::MatrixXd hat(const Eigen::VectorXd& v, int d) {
  if (d != 2 && d != 3) {
    throw std::invalid_argument("hat: d must be 2 or 3");
  }
  if (v.size() != so_dim(d)) {
    throw std::invalid_argument("hat: coordinate vector has wrong length");
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d, d);
  if (d == 2) {
    K(0, 1) = -v(0);
    K(1, 0) = v(0);
  } else {
    K(0, 1) = -v(2);
    K(0, 2) = v(1);
    K(1, 0) = v(2);
    K(1, 2) = -v(0);
    K(2, 0) = -v(1);
    K(2, 1) = v(0);
  }
  return K;
}

GroupElement GroupElement::Identity(int d, int n, int m) {
  GroupElement T;
  T.d = d;
  T.n = n;
  T.m = m;
  T.R = Eigen::MatrixXd::Identity(d, d);
  T.W = Eigen::MatrixXd::Zero(d, n + m);
  return T;
}

Eigen::MatrixXd GroupElement::embed() const {
  const int N = ambient();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N);
  M.topLeftCorner(d, d) = R;
  M.topRightCorner(d, n + m) = W;
  return M;
}

GroupElement GroupElement::FromEmbedding(const Eigen::MatrixXd& M, int d, int n, int m,
                                         double tol) {
  const int N = d + n + m;
  if (M.rows() != N || M.cols() != N) {
    throw std::invalid_argument("FromEmbedding: matrix size mismatch");
  }
  GroupElement T;
  T.d = d;
  T.n = n;
  T.m = m;
  T.R = M.topLeftCorner(d, d);
  T.W = M.topRightCorner(d, n + m);
  const double bottom_left = M.bottomLeftCorner(n + m, d).cwiseAbs().maxCoeff();
  const double bottom_right =
      (M.bottomRightCorner(n + m, n + m) - Eigen::MatrixXd::Identity(n + m, n + m))
          .cwiseAbs()
          .maxCoeff();
  if ((n + m) > 0 && (bottom_left > tol || bottom_right > tol)) {
    throw std::runtime_error("FromEmbedding: bottom rows are not [0 I]");
  }
  if (!T.satisfies_invariants(tol)) {
    throw std::runtime_error("FromEmbedding: rotation block violates SO(d) invariants");
  }
  return T;
}

bool GroupElement::satisfies_invariants(double tol) const {
  if (R.rows() != d || R.cols() != d || W.rows() != d || W.cols() != n + m) {
    return false;
  }
  const double ortho = (R.transpose() * R - Eigen::MatrixXd::Identity(d, d)).norm();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

AlgebraElement AlgebraElement::Zero(int d, int n, int m) {
  AlgebraElement a;
  a.d = d;
  a.n = n;
  a.m = m;
  a.omega = Eigen::VectorXd::Zero(so_dim(d));
  a.rho = Eigen::MatrixXd::Zero(d, n + m);
  return a;
}

Eigen::MatrixXd AlgebraElement::embed() const {
  const int N = ambient();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  M.topLeftCorner(d, d) = hat(omega, d);
  M.topRightCorner(d, n + m) = rho;
  return M;
}

SimAlgebraElement SimAlgebraElement::Zero(int d, int n, int m) {
  SimAlgebraElement a;
  a.d = d;
  a.n = n;
  a.m = m;
  a.Omega = Eigen::VectorXd::Zero(so_dim(d));
  a.gamma = Eigen::MatrixXd::Zero(d, n + m);
  a.L = Eigen::MatrixXd::Zero(n + m, n + m);
  return a;
}

Eigen::MatrixXd SimAlgebraElement::embed() const {
  const int N = ambient();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  M.topLeftCorner(d, d) = hat(Omega, d);
  M.topRightCorner(d, n + m) = gamma;
  M.bottomRightCorner(n + m, n + m) = L;
  return M;
}

namespace {

void check_same_dims(const GroupElement& a, const GroupElement& b, const char* who) {
  if (a.d != b.d || a.n != b.n || a.m != b.m) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

}  // namespace

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  check_same_dims(a, b, "compose");
  GroupElement out = a;
  out.R = a.R * b.R;
  out.W = a.R * b.W + a.W;
  return out;
}

GroupElement inverse(const GroupElement& T) {
  GroupElement out = T;
  out.R = T.R.transpose();
  out.W = -T.R.transpose() * T.W;
  return out;
}

Eigen::VectorXd act(const GroupElement& T, const Eigen::VectorXd& v, ActionSide side) {
  if (v.size() != T.ambient()) {
    throw std::invalid_argument("act: vector length mismatch");
  }
  const GroupElement& g = (side == ActionSide::Left) ? T : inverse(T);
  Eigen::VectorXd out(v.size());
  out.head(T.d) = g.R * v.head(T.d) + g.W * v.tail(T.n + T.m);
  out.tail(T.n + T.m) = v.tail(T.n + T.m);
  return out;
}

GroupElement sim_conjugate(const Eigen::MatrixXd& S, const GroupElement& T) {
  const int N = T.ambient();
  if (S.rows() != N || S.cols() != N) {
    throw std::invalid_argument("sim_conjugate: size mismatch");
  }
  const Eigen::MatrixXd M = S * T.embed() * S.inverse();
  // Normality of TFG in SIM means this parse must succeed; FromEmbedding
  // throws if it does not. Conjugation can lose a few digits, so the check
  // runs at a slightly relaxed tolerance.
  return GroupElement::FromEmbedding(M, T.d, T.n, T.m, 1e3 * kOrthoTol);
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
  K(0, 1) = -w(2);
  K(0, 2) = w(1);
  K(1, 0) = w(2);
  K(1, 2) = -w(0);
  K(2, 0) = -w(1);
  K(2, 1) = w(0);
  if (theta < 1e-10) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

namespace {

bool is_pure_so3(const Eigen::MatrixXd& A) {
  if (A.rows() != 3 || A.cols() != 3) return false;
  return (A + A.transpose()).cwiseAbs().maxCoeff() < 1e-14 &&
         std::abs(A.trace()) < 1e-14;
}

Eigen::MatrixXd matrix_exp_series(const Eigen::MatrixXd& A) {
  const int N = static_cast<int>(A.rows());
  // Scaling and squaring: bring the norm under 0.5, run the series, square back.
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd As = A * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 60; ++k) {
    term = (term * As) / static_cast<double>(k);
    sum += term;
    if (term.norm() <= kSeriesTol) break;
  }
  for (int i = 0; i < squarings; ++i) {
    sum = sum * sum;
  }
  return sum;
}

}  // namespace

Eigen::MatrixXd group_exp(const Eigen::MatrixXd& algebra, double t) {
  if (algebra.rows() != algebra.cols()) {
    throw std::invalid_argument("group_exp: matrix must be square");
  }
  const Eigen::MatrixXd A = algebra * t;
  if (is_pure_so3(A)) {
    return rodrigues(Eigen::Vector3d(A(2, 1), A(0, 2), A(1, 0)));
  }
  return matrix_exp_series(A);
}

Eigen::MatrixXd group_exp(const AlgebraElement& a, double t) { return group_exp(a.embed(), t); }

Eigen::MatrixXd group_exp(const SimAlgebraElement& a, double t) {
  return group_exp(a.embed(), t);
}

Eigen::MatrixXd orthonormalize_rotation(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(sv.size() - 1) <= kExactTol * std::max(1.0, sv(0))) {
    throw std::runtime_error("orthonormalize_rotation: degenerate input block");
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    S(A.rows() - 1, A.cols() - 1) = -1.0;
  }
  return svd.matrixU() * S * svd.matrixV().transpose();
}

GroupElement project_to_group(const Eigen::MatrixXd& M, int d, int n, int m) {
  const int N = d + n + m;
  if (M.rows() != N || M.cols() != N) {
    throw std::invalid_argument("project_to_group: size mismatch");
  }
  GroupElement T;
  T.d = d;
  T.n = n;
  T.m = m;
  T.R = orthonormalize_rotation(M.topLeftCorner(d, d));
  T.W = M.topRightCorner(d, n + m);
  return T;
}

}  // namespace groupobs
