#include "groupobs/reconstruct.hpp"

#include <cmath>
#include <stdexcept>

namespace groupobs {

ReconstructionResult umeyama_solve(const ReconstructionProblem& problem) {
  const int d = static_cast<int>(problem.Zbar.rows());
  const int nm = static_cast<int>(problem.Dunder.rows());
  const int cols = static_cast<int>(problem.Zbar.cols());
  if (problem.Dbar.rows() != d || problem.Dbar.cols() != cols ||
      problem.Dunder.cols() != cols) {
    throw std::invalid_argument("umeyama_solve: matrix sizes disagree");
  }

  Eigen::MatrixXd Z = problem.Zbar;
  Eigen::MatrixXd Db = problem.Dbar;
  Eigen::MatrixXd Du = problem.Dunder;
  if (problem.Sigma.size() > 0) {
    // The weight can be absorbed into the norm by right-scaling the data.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        0.5 * (problem.Sigma + problem.Sigma.transpose()));
    if (eig.eigenvalues()(0) <= 0.0) {
      throw std::invalid_argument("umeyama_solve: Sigma is not positive definite");
    }
    const Eigen::MatrixXd S = eig.operatorInverseSqrt();
    Z = Z * S;
    Db = Db * S;
    Du = Du * S;
  }

  const Eigen::MatrixXd DuDuT = Du * Du.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(DuDuT);
  const double ev_min = gram_eig.eigenvalues()(0);
  const double ev_max = gram_eig.eigenvalues()(nm - 1);
  if (ev_min <= 0.0 || ev_max / ev_min > kCondLimit) {
    throw std::runtime_error("umeyama_solve: underline Gram matrix is rank deficient");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(DuDuT);

  // Projector onto the kernel of Dunder.
  const Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(cols, cols) - Du.transpose() * llt.solve(Du);

  const Eigen::MatrixXd core = Z * proj * Db.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd U = svd.matrixU();
  const Eigen::MatrixXd V = svd.matrixV();

  Eigen::MatrixXd S_fix = Eigen::MatrixXd::Identity(d, d);
  if (U.determinant() * V.determinant() < 0.0) {
    S_fix(d - 1, d - 1) = -1.0;
  }

  ReconstructionResult result;
  result.singular_values = svd.singularValues();

  GroupElement est;
  est.d = d;
  est.n = (problem.n >= 0 && problem.m >= 0 && problem.n + problem.m == nm) ? problem.n : nm;
  est.m = nm - est.n;
  if (problem.system_case == SystemCase::Case1) {
    est.R = V * S_fix * U.transpose();
    est.W = (Db - est.R * Z) * Du.transpose() * llt.solve(Eigen::MatrixXd::Identity(nm, nm));
    result.residual = (Z - est.R.transpose() * (Db - est.W * Du)).squaredNorm();
  } else {
    est.R = U * S_fix * V.transpose();
    est.W = (Z - est.R * Db) * Du.transpose() * llt.solve(Eigen::MatrixXd::Identity(nm, nm));
    result.residual = (Z - (est.R * Db + est.W * Du)).squaredNorm();
  }
  result.estimate = est;
  result.uniqueness =
      result.singular_values(d - 2) > kRankRelTol * std::max(result.singular_values(0), 0.0) &&
      result.singular_values(0) > 0.0;
  return result;
}

RankCondition rank_condition(const DirectionTable& table) {
  RankCondition rc;
  rc.rank = table.rank;
  rc.sigma_min = table.sigma_min;
  rc.ges_eligible = table.rank >= table.N;
  return rc;
}

double error_metric(const GroupElement& est, const GroupElement& truth, SystemCase c) {
  if (est.d != truth.d || est.n + est.m != truth.n + truth.m) {
    throw std::invalid_argument("error_metric: dimension mismatch");
  }
  if (c == SystemCase::Case1) {
    return (inverse(truth).embed() - inverse(est).embed()).norm();
  }
  return (truth.embed() - est.embed()).norm();
}

bool uniqueness_check(const ReconstructionResult& result) { return result.uniqueness; }

UmeyamaReconstructor::UmeyamaReconstructor(const DirectionTable& table, SystemCase c,
                                           Eigen::MatrixXd sigma)
    : Dbar_(table.Dbar), Dunder_(table.Dunder), Sigma_(std::move(sigma)), case_(c),
      n_(table.n), m_(table.m) {}

ReconstructionResult UmeyamaReconstructor::reconstruct(const Eigen::MatrixXd& Zbar) const {
  ReconstructionProblem problem;
  problem.Zbar = Zbar;
  problem.Dbar = Dbar_;
  problem.Dunder = Dunder_;
  problem.Sigma = Sigma_;
  problem.system_case = case_;
  problem.n = n_;
  problem.m = m_;
  return umeyama_solve(problem);
}

}  // namespace groupobs
