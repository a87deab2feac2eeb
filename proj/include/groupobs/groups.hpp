#pragma once

#include <Eigen/Dense>

#include "groupobs/tolerances.hpp"

namespace groupobs {

/// Skew embedding of so(d) coordinates, d in {2,3}. For d=3 this is the usual
/// cross-product matrix: hat(v) * w == v x w.
Eigen::MatrixXd hat(const Eigen::VectorXd& v, int d);

/// Dimension of the so(d) coordinate vector.
inline int so_dim(int d) { return d * (d - 1) / 2; }

/// Element of TFG(d,n,m): rotation block R plus vector block W, embedded as
///   [ R  W ]
///   [ 0  I ]
/// in GL(d+n+m, R). The n leading columns of W are world-frame states, the m
/// trailing ones are R times body-frame states.
struct GroupElement {
  int d = 3;
  int n = 0;
  int m = 0;
  Eigen::MatrixXd R;  // d x d
  Eigen::MatrixXd W;  // d x (n+m)

  int ambient() const { return d + n + m; }

  static GroupElement Identity(int d, int n, int m);
  Eigen::MatrixXd embed() const;

  /// Parses a dense (d+n+m)^2 matrix back into a group element, checking the
  /// TFG invariants (orthonormal R with det +1, identity lower-right block,
  /// zero lower-left block).
  static GroupElement FromEmbedding(const Eigen::MatrixXd& M, int d, int n, int m,
                                    double tol = kOrthoTol);

  bool satisfies_invariants(double tol = kOrthoTol) const;
};

/// Element of tfg(d,n,m): [ hat(omega)  rho ; 0  0 ].
struct AlgebraElement {
  int d = 3;
  int n = 0;
  int m = 0;
  Eigen::VectorXd omega;  // so(d) coordinates
  Eigen::MatrixXd rho;    // d x (n+m)

  int ambient() const { return d + n + m; }

  static AlgebraElement Zero(int d, int n, int m);
  Eigen::MatrixXd embed() const;
};

/// Element of sim_{n+m}(d): [ hat(Omega)  gamma ; 0  L ]. Used as the constant
/// automorphism generator of the system dynamics.
struct SimAlgebraElement {
  int d = 3;
  int n = 0;
  int m = 0;
  Eigen::VectorXd Omega;  // so(d) coordinates
  Eigen::MatrixXd gamma;  // d x (n+m)
  Eigen::MatrixXd L;      // (n+m) x (n+m)

  int ambient() const { return d + n + m; }

  static SimAlgebraElement Zero(int d, int n, int m);
  Eigen::MatrixXd embed() const;
};

GroupElement compose(const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupElement& T);

enum class ActionSide { Left, Inverse };

/// Homogeneous-coordinate action: embed(T) * v or embed(T^-1) * v.
Eigen::VectorXd act(const GroupElement& T, const Eigen::VectorXd& v, ActionSide side);

/// Conjugation S * embed(T) * S^-1 by an invertible SIM_{n+m}(d) matrix,
/// parsed back into a group element. TFG is normal in SIM, so the result must
/// satisfy the group invariants; a violation is reported as a runtime error.
GroupElement sim_conjugate(const Eigen::MatrixXd& S, const GroupElement& T);

/// Matrix exponential of t * A for an algebra embedding A. Pure so(3) blocks
/// take the closed Rodrigues form; everything else goes through scaling and
/// squaring with a series truncated at kSeriesTol.
Eigen::MatrixXd group_exp(const Eigen::MatrixXd& algebra, double t);
Eigen::MatrixXd group_exp(const AlgebraElement& a, double t);
Eigen::MatrixXd group_exp(const SimAlgebraElement& a, double t);

/// Rodrigues formula for SO(3).
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w);

/// Projects a near-TFG matrix back onto the group: R block replaced by the
/// nearest rotation (SVD polar factor, det corrected), W copied, bottom rows
/// reset to [0 I].
GroupElement project_to_group(const Eigen::MatrixXd& M, int d, int n, int m);

/// Nearest rotation to a square matrix, with the same reflection fix as the
/// reconstruction solver.
Eigen::MatrixXd orthonormalize_rotation(const Eigen::MatrixXd& A);

}  // namespace groupobs
