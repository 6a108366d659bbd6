#include "test_util.hpp"

namespace unimts {
namespace {

using testing::random_quaternion;
using testing::random_unit;

void expect_quat_near(const Quaternion& a, const Quaternion& b, double tol) {
  EXPECT_NEAR(a.w, b.w, tol);
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

TEST(QuatMul, IdentityElement) {
  Rng rng(1);
  const auto q = random_quaternion(rng);
  EXPECT_EQ(quat_mul(Quaternion::identity(), q), q);
  EXPECT_EQ(quat_mul(q, Quaternion::identity()), q);
}

TEST(QuatMul, HamiltonTable) {
  const Quaternion i{0, 1, 0, 0}, j{0, 0, 1, 0}, k{0, 0, 0, 1};
  EXPECT_EQ(quat_mul(i, j), k);
  EXPECT_EQ(quat_mul(j, k), i);
  EXPECT_EQ(quat_mul(k, i), j);
  EXPECT_EQ(quat_mul(j, i), -k);
  EXPECT_EQ(quat_mul(i, i), (Quaternion{-1, 0, 0, 0}));
}

TEST(QuatMul, ConjugateGivesSquaredNorm) {
  Rng rng(2);
  for (int n = 0; n < 100; ++n) {
    const auto q = random_quaternion(rng);
    expect_quat_near(quat_mul(q, quat_conj(q)), {q.norm_sq(), 0, 0, 0}, 1e-12);
  }
}

TEST(QuatMul, Associative) {
  Rng rng(3);
  for (int n = 0; n < 1000; ++n) {
    const auto a = random_unit(rng), b = random_unit(rng), c = random_unit(rng);
    expect_quat_near(quat_mul(quat_mul(a, b), c), quat_mul(a, quat_mul(b, c)), 1e-12);
  }
}

TEST(QuatConj, IdentityAndInvolution) {
  EXPECT_EQ(quat_conj(Quaternion::identity()), Quaternion::identity());
  Rng rng(4);
  const auto q = random_quaternion(rng);
  EXPECT_EQ(quat_conj(quat_conj(q)), q);
  EXPECT_EQ(quat_conj(q), (Quaternion{q.w, -q.x, -q.y, -q.z}));
}

TEST(QuatConj, ReversesProducts) {
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    const auto a = random_unit(rng), b = random_unit(rng);
    expect_quat_near(quat_conj(quat_mul(a, b)), quat_mul(quat_conj(b), quat_conj(a)), 1e-14);
  }
}

TEST(RotateGlobalToLocal, IdentityLeavesVector) {
  const Vec3 v{1, 2, 3};
  EXPECT_EQ(rotate_global_to_local(Quaternion::identity(), v), v);
}

TEST(RotateGlobalToLocal, QuarterTurnAboutZ) {
  const double h = std::sqrt(0.5);
  const Quaternion q{h, 0, 0, h};
  // Oracle: the global-to-local map is R(q)ᵀ, and the z quarter turn has
  // R = [[0,-1,0],[1,0,0],[0,0,1]], so Rᵀ x̂ = (0,-1,0).
  const Mat3 rz{{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}};
  const Vec3 expected = mat_vec(transpose(rz), {1, 0, 0});
  const Vec3 got = rotate_global_to_local(q, {1, 0, 0});
  EXPECT_LT(testing::max_abs_diff(got, expected), 1e-15);
  EXPECT_NEAR(got[1], -1.0, 1e-15);
}

TEST(RotateGlobalToLocal, Isometry) {
  Rng rng(6);
  for (int n = 0; n < 1000; ++n) {
    const auto q = random_unit(rng);
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    EXPECT_NEAR(testing::norm3(rotate_global_to_local(q, v)), testing::norm3(v), 1e-12);
  }
}

TEST(RotateGlobalToLocal, InverseComposition) {
  Rng rng(7);
  for (int n = 0; n < 1000; ++n) {
    const auto q = random_unit(rng);
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const auto back = rotate_global_to_local(quat_conj(q), rotate_global_to_local(q, v));
    EXPECT_LT(testing::max_abs_diff(back, v), 1e-9);
  }
}

TEST(RotateGlobalToLocal, MatchesTransposedMatrix) {
  Rng rng(8);
  for (int n = 0; n < 200; ++n) {
    const auto q = random_unit(rng);
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    EXPECT_LT(testing::max_abs_diff(rotate_global_to_local(q, v), mat_vec(transpose(to_matrix(q)), v)), 1e-12);
    EXPECT_LT(testing::max_abs_diff(rotate_local_to_global(q, v), mat_vec(to_matrix(q), v)), 1e-12);
  }
}

TEST(RotateGlobalToLocal, RejectsNonUnit) {
  EXPECT_ERROR_KIND(rotate_global_to_local({2, 0, 0, 0}, {1, 0, 0}), ErrorKind::NonUnitQuaternion);
  EXPECT_ERROR_KIND(rotate_global_to_local({1 + 1e-5, 0, 0, 0}, {1, 0, 0}), ErrorKind::NonUnitQuaternion);
  EXPECT_NO_THROW(rotate_global_to_local({1 + 1e-7, 0, 0, 0}, {1, 0, 0}));
}

TEST(SampleUniformRotation, OrthonormalWithUnitDeterminant) {
  Rng rng(9);
  for (int n = 0; n < 10000; ++n) {
    const auto r = sample_uniform_rotation(rng);
    EXPECT_GE(r.quaternion.w, 0.0);
    EXPECT_NEAR(r.quaternion.norm(), 1.0, 1e-12);
    const auto rtr = matmul(transpose(r.matrix), r.matrix);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(rtr[i][j], i == j ? 1.0 : 0.0, 1e-9);
    EXPECT_NEAR(determinant(r.matrix), 1.0, 1e-9);
  }
}

TEST(SampleUniformRotation, MeanImageOfAxisVanishes) {
  Rng rng(10);
  Vec3 sum{0, 0, 0};
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto x = mat_vec(sample_uniform_rotation(rng).matrix, {1, 0, 0});
    for (int i = 0; i < 3; ++i) sum[i] += x[i];
  }
  for (auto& s : sum) s /= n;
  // Each coordinate has variance 1/3; the norm of the mean is about 0.003.
  EXPECT_LT(testing::norm3(sum), 0.02);
}

TEST(SampleUniformRotation, SameSeedSameRotation) {
  Rng a(42), b(42);
  for (int n = 0; n < 10; ++n) {
    const auto ra = sample_uniform_rotation(a), rb = sample_uniform_rotation(b);
    EXPECT_EQ(ra.quaternion, rb.quaternion);
    EXPECT_EQ(ra.matrix, rb.matrix);
  }
}

TEST(EnforceContinuity, FlipsAntipodalSample) {
  Rng rng(11);
  const auto q = random_unit(rng);
  const std::vector<Quaternion> in{q, -q};
  const auto out = enforce_continuity(in);
  EXPECT_EQ(out[0], q);
  EXPECT_EQ(out[1], q);
}

TEST(EnforceContinuity, ContinuousSequenceUnchanged) {
  std::vector<Quaternion> qs;
  for (int t = 0; t < 50; ++t) qs.push_back(Quaternion::from_axis_angle({0, 0, 1}, 0.1 * t));
  EXPECT_EQ(enforce_continuity(qs), qs);
}

TEST(EnforceContinuity, ConsecutiveDotsNonNegative) {
  Rng rng(12);
  std::vector<Quaternion> qs;
  for (int t = 0; t < 500; ++t) qs.push_back(random_unit(rng));
  for (auto& q : qs)
    if (rng.uniform() < 0.5) q = -q;
  const auto out = enforce_continuity(qs);
  EXPECT_EQ(out.front(), qs.front());
  for (std::size_t t = 1; t < out.size(); ++t) {
    EXPECT_GE(quat_dot(out[t - 1], out[t]), 0.0);
    EXPECT_TRUE(out[t] == qs[t] || out[t] == -qs[t]);
  }
}

}  // namespace
}  // namespace unimts
