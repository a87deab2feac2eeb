#include <doctest.h>

#include "groupobs/groups.hpp"
#include "test_util.hpp"

using namespace groupobs;

TEST_CASE("hat matches the so(2) and so(3) displays") {
  Eigen::VectorXd v2(1);
  v2 << 1.5;
  Eigen::MatrixXd K2 = hat(v2, 2);
  CHECK(K2(0, 1) == -1.5);
  CHECK(K2(1, 0) == 1.5);
  CHECK(K2(0, 0) == 0.0);

  Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  CHECK(hat(zero3, 3).norm() == 0.0);

  Eigen::VectorXd v3(3);
  v3 << 1, 2, 3;
  Eigen::MatrixXd K3 = hat(v3, 3);
  Eigen::MatrixXd expected(3, 3);
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK((K3 - expected).norm() == 0.0);
}

TEST_CASE("hat cross-product identity and linearity") {
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector3d v = rng.gaussian_vector(3);
    const Eigen::Vector3d w = rng.gaussian_vector(3);
    CHECK((hat(v, 3) * w - v.cross(w)).norm() < 1e-14);

    const Eigen::VectorXd u = rng.gaussian_vector(3);
    const double a = rng.gaussian(), b = rng.gaussian();
    CHECK((hat(a * v + b * u, 3) - a * hat(v, 3) - b * hat(u, 3)).norm() < 1e-13);
  }
}

TEST_CASE("hat rejects dimension mismatches") {
  Eigen::VectorXd v(2);
  v << 1, 2;
  CHECK_THROWS_AS(hat(v, 3), std::invalid_argument);
  CHECK_THROWS_AS(hat(v, 2), std::invalid_argument);
  CHECK_THROWS_AS(hat(v, 4), std::invalid_argument);
}

TEST_CASE("compose and inverse against dense oracles") {
  Rng rng(21);
  for (int it = 0; it < 40; ++it) {
    const int d = it % 2 == 0 ? 3 : 2;
    const int n = 1 + it % 3;
    const int m = it % 2;
    const GroupElement a = testutil::random_group(rng, d, n, m);
    const GroupElement b = testutil::random_group(rng, d, n, m);

    CHECK((compose(a, GroupElement::Identity(d, n, m)).embed() - a.embed()).norm() < 1e-12);
    CHECK((inverse(GroupElement::Identity(d, n, m)).embed() -
           Eigen::MatrixXd::Identity(a.ambient(), a.ambient()))
              .norm() == 0.0);
    CHECK((compose(a, inverse(a)).embed() -
           Eigen::MatrixXd::Identity(a.ambient(), a.ambient()))
              .norm() < 1e-12);
    CHECK((compose(a, b).embed() - a.embed() * b.embed()).norm() < 1e-12);
    CHECK((inverse(a).embed() - a.embed().inverse()).norm() < 1e-11);
    CHECK((inverse(inverse(a)).embed() - a.embed()).norm() < 1e-12);
  }
}

TEST_CASE("compose associativity") {
  Rng rng(31);
  for (int it = 0; it < 30; ++it) {
    const GroupElement a = testutil::random_group(rng, 3, 2, 1);
    const GroupElement b = testutil::random_group(rng, 3, 2, 1);
    const GroupElement c = testutil::random_group(rng, 3, 2, 1);
    CHECK((compose(compose(a, b), c).embed() - compose(a, compose(b, c)).embed()).norm() <
          1e-9);
  }
}

TEST_CASE("act matches the dense product") {
  Rng rng(41);
  for (int it = 0; it < 30; ++it) {
    const GroupElement T = testutil::random_group(rng, 3, 2, 0);
    const Eigen::VectorXd v = rng.gaussian_vector(5);
    CHECK((act(T, v, ActionSide::Left) - T.embed() * v).norm() < 1e-12);
    CHECK((act(T, v, ActionSide::Inverse) - T.embed().inverse() * v).norm() < 1e-10);
  }
  const GroupElement id = GroupElement::Identity(3, 2, 0);
  Eigen::VectorXd v(5);
  v << 1, 2, 3, 4, 5;
  CHECK((act(id, v, ActionSide::Left) - v).norm() == 0.0);
  CHECK(act(id, Eigen::VectorXd::Zero(5), ActionSide::Left).norm() == 0.0);
  CHECK_THROWS_AS(act(id, Eigen::VectorXd::Zero(4), ActionSide::Left),
                  std::invalid_argument);
}

TEST_CASE("sim_conjugate lands back in the group") {
  Rng rng(51);
  const GroupElement T = testutil::random_group(rng, 3, 2, 0);
  const Eigen::MatrixXd I5 = Eigen::MatrixXd::Identity(5, 5);
  CHECK((sim_conjugate(I5, T).embed() - T.embed()).norm() < 1e-12);

  // normality: 1000 random (S, T) pairs parse back into valid elements
  for (int it = 0; it < 1000; ++it) {
    const GroupElement Tr = testutil::random_group(rng, 3, 2, 0);
    const Eigen::MatrixXd S = testutil::random_sim_group_matrix(rng, 3, 2, 0);
    const GroupElement out = sim_conjugate(S, Tr);
    CHECK(out.satisfies_invariants(1e-6));
  }

  // subgroup closure: S in TFG itself
  const GroupElement S_tfg = testutil::random_group(rng, 3, 2, 0);
  const GroupElement out = sim_conjugate(S_tfg.embed(), T);
  CHECK(out.satisfies_invariants());
}

TEST_CASE("group_exp basic identities") {
  Rng rng(61);
  const AlgebraElement zero = AlgebraElement::Zero(3, 2, 0);
  CHECK((group_exp(zero, 1.0) - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-14);

  // rotation about z by theta against the Rodrigues oracle
  const double theta = 1.2345;
  Eigen::VectorXd wz(3);
  wz << 0, 0, theta;
  const Eigen::MatrixXd R = group_exp(hat(wz, 3), 1.0);
  Eigen::Matrix3d expected;
  expected << std::cos(theta), -std::sin(theta), 0, std::sin(theta), std::cos(theta), 0, 0, 0,
      1;
  CHECK((R - expected).norm() < 1e-13);

  for (int it = 0; it < 20; ++it) {
    const SimAlgebraElement a = testutil::random_sim(rng, 3, 2, 1);
    const Eigen::MatrixXd E = group_exp(a, 0.7);
    const Eigen::MatrixXd Einv = group_exp(a, -0.7);
    CHECK((E * Einv - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
  }
}

TEST_CASE("group_exp of an algebra element lands in TFG") {
  Rng rng(71);
  for (int it = 0; it < 20; ++it) {
    const AlgebraElement a = testutil::random_algebra(rng, 3, 2, 1);
    const Eigen::MatrixXd E = group_exp(a, 0.5);
    const GroupElement T = GroupElement::FromEmbedding(E, 3, 2, 1);
    CHECK(T.satisfies_invariants(kOrthoTol));
  }
}

TEST_CASE("project_to_group") {
  Rng rng(81);
  const GroupElement T = testutil::random_group(rng, 3, 2, 0);

  // fixed point
  const GroupElement P1 = project_to_group(T.embed(), 3, 2, 0);
  CHECK((P1.embed() - T.embed()).norm() < 1e-12);

  // scaled rotation block is pulled back to orthonormal with det one
  Eigen::MatrixXd M = T.embed();
  M.topLeftCorner(3, 3) *= 1.001;
  const GroupElement P2 = project_to_group(M, 3, 2, 0);
  CHECK((P2.R.transpose() * P2.R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(P2.R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((P2.R - T.R).norm() < 1e-10);

  // reflection-contaminated block still projects to a proper rotation
  Eigen::MatrixXd Mr = T.embed();
  Mr.topLeftCorner(3, 3) = T.R * Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  const GroupElement P3 = project_to_group(Mr, 3, 2, 0);
  CHECK(P3.R.determinant() == doctest::Approx(1.0).epsilon(1e-9));

  // degenerate rotation block
  Eigen::MatrixXd Md = Eigen::MatrixXd::Identity(5, 5);
  Md(0, 0) = Md(1, 1) = Md(2, 2) = 0.0;
  CHECK_THROWS_AS(project_to_group(Md, 3, 2, 0), std::runtime_error);
}

TEST_CASE("FromEmbedding rejects matrices off the group") {
  Rng rng(91);
  const GroupElement T = testutil::random_group(rng, 3, 2, 0);

  Eigen::MatrixXd bad_bottom = T.embed();
  bad_bottom(4, 1) = 0.1;  // nonzero lower-left block
  CHECK_THROWS_AS(GroupElement::FromEmbedding(bad_bottom, 3, 2, 0), std::runtime_error);

  Eigen::MatrixXd bad_rot = T.embed();
  bad_rot.topLeftCorner(3, 3) *= 1.5;
  CHECK_THROWS_AS(GroupElement::FromEmbedding(bad_rot, 3, 2, 0), std::runtime_error);

  CHECK_THROWS_AS(GroupElement::FromEmbedding(Eigen::MatrixXd::Identity(4, 4), 3, 2, 0),
                  std::invalid_argument);
}
