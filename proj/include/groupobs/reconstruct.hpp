#pragma once

#include <Eigen/Dense>

#include "groupobs/groups.hpp"
#include "groupobs/immersion.hpp"

namespace groupobs {

/// Weighted orthogonal-alignment problem recovering (R, W) from the estimated
/// barred blocks. Columns ordered (i ascending, j ascending within i).
struct ReconstructionProblem {
  Eigen::MatrixXd Zbar;    // d x (M*N)
  Eigen::MatrixXd Dbar;    // d x (M*N)
  Eigen::MatrixXd Dunder;  // (n+m) x (M*N)
  Eigen::MatrixXd Sigma;   // optional SPD weight (M*N x M*N); empty = identity
  SystemCase system_case = SystemCase::Case1;
  int n = -1;  // world/body split of the recovered W; defaults to n = n+m, m = 0
  int m = -1;
};

struct ReconstructionResult {
  GroupElement estimate;
  Eigen::VectorXd singular_values;  // of Zbar * P_perp * Dbar^T, descending
  bool uniqueness = false;          // rank >= d-1 by singular-value threshold
  double residual = 0.0;            // optimized cost value
};

/// Closed-form global minimizer of || Zhat - chi^-1 D ||^2 (Case 1) or
/// || Zhat - chi D ||^2 (Case 2) over the two-frame group, via SVD with the
/// reflection fix applied at the last singular value.
ReconstructionResult umeyama_solve(const ReconstructionProblem& problem);

struct RankCondition {
  bool ges_eligible = false;
  double sigma_min = 0.0;  // smallest singular value of D
  int rank = 0;
};

/// rank(D) >= d+n+m under the scale-free singular-value threshold.
RankCondition rank_condition(const DirectionTable& table);

/// Extrinsic metric: Case 1 compares embedded inverses, Case 2 the embeddings.
double error_metric(const GroupElement& est, const GroupElement& truth, SystemCase c);

/// True iff the alignment optimum is unique: rank of the SVD core >= d-1.
bool uniqueness_check(const ReconstructionResult& result);

/// Abstract reconstruction interface; only the two-frame/Umeyama instance is
/// implemented.
class GroupReconstructor {
 public:
  virtual ~GroupReconstructor() = default;
  virtual ReconstructionResult reconstruct(const Eigen::MatrixXd& Zbar) const = 0;
};

class UmeyamaReconstructor final : public GroupReconstructor {
 public:
  UmeyamaReconstructor(const DirectionTable& table, SystemCase c,
                       Eigen::MatrixXd sigma = {});
  ReconstructionResult reconstruct(const Eigen::MatrixXd& Zbar) const override;

 private:
  Eigen::MatrixXd Dbar_, Dunder_, Sigma_;
  SystemCase case_;
  int n_ = 0, m_ = 0;
};

}  // namespace groupobs
