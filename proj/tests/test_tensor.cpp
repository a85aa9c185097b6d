#include "dmn/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace dmn {
namespace {

SymTensor random_sym(std::mt19937& rng) {
  std::normal_distribution<double> dist;
  return SymTensor::from_components(dist(rng), dist(rng), dist(rng), dist(rng), dist(rng),
                                    dist(rng));
}

Mat6 random_sym6(std::mt19937& rng) {
  std::normal_distribution<double> dist;
  Mat6 m;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b <= a; ++b) m(a, b) = m(b, a) = dist(rng);
  return m;
}

Mat3 random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> dist;
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = dist(rng);
  Eigen::HouseholderQR<Mat3> qr(a);
  Mat3 q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1;
  return q;
}

TEST(SymTensorTest, DotEqualsDoubleContraction) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const SymTensor a = random_sym(rng);
    const SymTensor b = random_sym(rng);
    const double contraction = (a.to_matrix().array() * b.to_matrix().array()).sum();
    EXPECT_NEAR(a.dot(b), contraction, 1e-13 * a.norm() * b.norm());
  }
}

TEST(SymTensorTest, ComponentAccessMatchesConstruction) {
  const SymTensor t = SymTensor::from_components(1, 2, 3, 4, 5, 6);
  EXPECT_DOUBLE_EQ(t(0, 0), 1);
  EXPECT_DOUBLE_EQ(t(1, 1), 2);
  EXPECT_DOUBLE_EQ(t(2, 2), 3);
  EXPECT_DOUBLE_EQ(t(0, 1), 4);
  EXPECT_DOUBLE_EQ(t(1, 0), 4);
  EXPECT_DOUBLE_EQ(t(0, 2), 5);
  EXPECT_DOUBLE_EQ(t(1, 2), 6);
  // Off-diagonal coordinates carry the sqrt(2) scale.
  EXPECT_DOUBLE_EQ(t.mandel()[3], 4 * kSqrt2);
  EXPECT_DOUBLE_EQ(t.norm() * t.norm(), t.dot(t));
}

TEST(SymTensorTest, MatrixRoundTrip) {
  std::mt19937 rng(1);
  const SymTensor t = random_sym(rng);
  const SymTensor back = SymTensor::from_matrix(t.to_matrix());
  EXPECT_LT((back.mandel() - t.mandel()).norm(), 1e-14);
}

TEST(SymTensorTest, DeviatoricSphericalSplit) {
  std::mt19937 rng(7);
  const SymTensor t = random_sym(rng);
  EXPECT_NEAR(t.dev().trace(), 0, 1e-14);
  EXPECT_LT(((t.dev() + t.sph()).mandel() - t.mandel()).norm(), 1e-14);
  EXPECT_NEAR(t.dev().dot(t.sph()), 0, 1e-13);
}

TEST(SymTensorTest, SymDyadMatchesDefinition) {
  const Vec3 a{1.0, -2.0, 0.5};
  const Vec3 n{0.3, 0.4, -0.8};
  const SymTensor s = SymTensor::sym_dyad(a, n);
  const Mat3 expected = 0.5 * (a * n.transpose() + n * a.transpose());
  EXPECT_LT((s.to_matrix() - expected).norm(), 1e-14);
}

TEST(SymTensorTest, EigenvaluesOfDiagonalPlusShear) {
  // [[0, 1], [1, 0]] block has eigenvalues -1 and 1.
  const SymTensor t = SymTensor::from_components(0, 0, 5, 1, 0, 0);
  const Vec3 ev = t.eigenvalues3();
  EXPECT_NEAR(ev[0], -1, 1e-12);
  EXPECT_NEAR(ev[1], 1, 1e-12);
  EXPECT_NEAR(ev[2], 5, 1e-12);
}

TEST(ProjectorTest, PartitionOfIdentity) {
  const Mat6 p1 = projector_spherical();
  const Mat6 p2 = projector_deviatoric();
  EXPECT_LT((p1 + p2 - Mat6::Identity()).norm(), 1e-14);
  EXPECT_LT((p1 * p1 - p1).norm(), 1e-14);
  EXPECT_LT((p2 * p2 - p2).norm(), 1e-14);
  EXPECT_LT((p1 * p2).norm(), 1e-14);
  EXPECT_NEAR(p1.trace(), 1, 1e-14);  // rank 1
  EXPECT_NEAR(p2.trace(), 5, 1e-14);  // rank 5
}

TEST(ProjectorTest, SplitsTensorsAsExpected) {
  std::mt19937 rng(3);
  const SymTensor t = random_sym(rng);
  EXPECT_LT((projector_spherical() * t.mandel() - t.sph().mandel()).norm(), 1e-14);
  EXPECT_LT((projector_deviatoric() * t.mandel() - t.dev().mandel()).norm(), 1e-14);
}

TEST(IsotropicTest, ModuliFromYoungPoisson) {
  // E = 72 GPa, nu = 0.26 gives K = 50 GPa and G = 28.5714 GPa.
  const IsotropicModuli glass = moduli_from_young_poisson(72.0e3, 0.26);
  EXPECT_NEAR(glass.bulk, 50.0e3, 1e-9);
  EXPECT_NEAR(glass.shear, 28571.4285714, 1e-4);
  // E = 1.5 GPa, nu = 0.42 gives K = 3.125 GPa and G = 0.52817 GPa.
  const IsotropicModuli matrix = moduli_from_young_poisson(1.5e3, 0.42);
  EXPECT_NEAR(matrix.bulk, 3125.0, 1e-9);
  EXPECT_NEAR(matrix.shear, 528.169014085, 1e-6);
}

TEST(IsotropicTest, StiffnessActsByModuli) {
  const StiffnessMatrix c = isotropic_stiffness(2.0, 5.0);
  const SymTensor sph = SymTensor::identity();
  EXPECT_LT(((c * sph).mandel() - 3.0 * 2.0 * sph.mandel()).norm(), 1e-13);
  const SymTensor dev = SymTensor::from_components(1, -1, 0, 0.3, 0, 0);
  EXPECT_LT(((c * dev).mandel() - 2.0 * 5.0 * dev.mandel()).norm(), 1e-13);
}

TEST(IsotropicTest, StiffnessSpectrum) {
  // Eigenvalues of 3K P1 + 2G P2 are {3K} once and {2G} five times.
  const StiffnessMatrix c = isotropic_stiffness(2.0, 5.0);
  const Vec6 ev = eig_sym(c.mandel());
  EXPECT_NEAR(ev[0], 6, 1e-12);
  for (int i = 1; i < 6; ++i) EXPECT_NEAR(ev[i], 10, 1e-12);
}

TEST(IsotropicTest, ProjectionRecoversModuli) {
  const StiffnessMatrix c = isotropic_stiffness(3.7, 1.9);
  const IsotropicModuli m = isotropic_projection(c);
  EXPECT_NEAR(m.bulk, 3.7, 1e-13);
  EXPECT_NEAR(m.shear, 1.9, 1e-13);
  // Adding a traceless-in-both-projectors perturbation must not move the
  // projection: use a rank-one dyad minus its isotropic part.
  std::mt19937 rng(11);
  const SymTensor t = random_sym(rng);
  Mat6 noise = t.mandel() * t.mandel().transpose();
  const double k_noise = (projector_spherical().array() * noise.array()).sum() / 3.0;
  const double g_noise = (projector_deviatoric().array() * noise.array()).sum() / 10.0;
  noise -= 3.0 * k_noise * projector_spherical() + 2.0 * g_noise * projector_deviatoric();
  const IsotropicModuli m2 = isotropic_projection(StiffnessMatrix(c.mandel() + noise));
  EXPECT_NEAR(m2.bulk, 3.7, 1e-12);
  EXPECT_NEAR(m2.shear, 1.9, 1e-12);
}

TEST(UnitVectorTest, NormalizesAndCanonicalizes) {
  const UnitVector3 n(Vec3{0, 0, -2});
  EXPECT_NEAR(n.vec().norm(), 1, 1e-15);
  EXPECT_DOUBLE_EQ(n[2], -1);
  const UnitVector3 c = n.canonical();
  EXPECT_DOUBLE_EQ(c[2], 1);  // first nonzero component made positive
  EXPECT_THROW(UnitVector3(Vec3::Zero()), std::invalid_argument);
}

TEST(LaminationProjectorTest, AxisAlignedForm) {
  // For n = e1 the range of a -> sym(a (x) n) is spanned by the 11, 12, 13
  // coordinate directions, so the projector is that diagonal selector.
  const Mat6 p = lamination_projector(UnitVector3(Vec3{1, 0, 0}));
  Mat6 expected = Mat6::Zero();
  expected(0, 0) = expected(3, 3) = expected(4, 4) = 1;
  EXPECT_LT((p - expected).norm(), 1e-14);
}

TEST(LaminationProjectorTest, IdempotentRankThreeAndFixesDyads) {
  std::mt19937 rng(5);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 10; ++trial) {
    const UnitVector3 n(Vec3{dist(rng), dist(rng), dist(rng)});
    const Mat6 p = lamination_projector(n);
    EXPECT_LT((p * p - p).norm(), 1e-13);
    EXPECT_LT((p - p.transpose()).norm(), 1e-14);
    EXPECT_NEAR(p.trace(), 3, 1e-13);
    const Vec3 a{dist(rng), dist(rng), dist(rng)};
    const SymTensor dyad = SymTensor::sym_dyad(a, n.vec());
    EXPECT_LT((p * dyad.mandel() - dyad.mandel()).norm(), 1e-13);
  }
}

TEST(SymDyadMatrixTest, MatchesDyadAndNormalEquations) {
  std::mt19937 rng(9);
  std::normal_distribution<double> dist;
  const UnitVector3 n(Vec3{dist(rng), dist(rng), dist(rng)});
  const Eigen::Matrix<double, 6, 3> s = sym_dyad_matrix(n.vec());
  const Vec3 a{dist(rng), dist(rng), dist(rng)};
  EXPECT_LT((s * a - SymTensor::sym_dyad(a, n.vec()).mandel()).norm(), 1e-14);
  // S^T S = (I + n n^T) / 2 for a unit normal.
  const Mat3 gram = 0.5 * (Mat3::Identity() + n.vec() * n.vec().transpose());
  EXPECT_LT((s.transpose() * s - gram).norm(), 1e-14);
  // S^T applied to a stress equals the traction sigma . n.
  const SymTensor sigma = random_sym(rng);
  EXPECT_LT((s.transpose() * sigma.mandel() - sigma.to_matrix() * n.vec()).norm(), 1e-14);
  // The projector factors through S: P = S (S^T S)^{-1} S^T.
  const Mat6 p = s * gram.inverse() * s.transpose();
  EXPECT_LT((p - lamination_projector(n)).norm(), 1e-13);
}

TEST(EigSymTest, MatchesLibrarySolver) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat6 m = random_sym6(rng);
    const Vec6 ours = eig_sym(m);
    Eigen::SelfAdjointEigenSolver<Mat6> es(m, Eigen::EigenvaluesOnly);
    EXPECT_LT((ours - es.eigenvalues()).norm(), 1e-11 * (1.0 + m.norm()));
  }
}

TEST(EigSymTest, VectorsDiagonalize) {
  std::mt19937 rng(17);
  const Mat6 m = random_sym6(rng);
  Mat6 v;
  const Vec6 ev = eig_sym(m, &v);
  EXPECT_LT((v.transpose() * v - Mat6::Identity()).norm(), 1e-12);
  EXPECT_LT((v.transpose() * m * v - Mat6(ev.asDiagonal())).norm(), 1e-11 * (1.0 + m.norm()));
  for (int i = 0; i + 1 < 6; ++i) EXPECT_LE(ev[i], ev[i + 1]);
}

TEST(RotationTest, RepresentsTensorRotation) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3 r = random_rotation(rng);
    const Mat6 q = mandel_rotation(r);
    EXPECT_LT((q.transpose() * q - Mat6::Identity()).norm(), 1e-13);
    const SymTensor t = random_sym(rng);
    const Mat3 rotated = r * t.to_matrix() * r.transpose();
    EXPECT_LT((q * t.mandel() - SymTensor::from_matrix(rotated).mandel()).norm(), 1e-13);
  }
}

TEST(RotationTest, IsotropicStiffnessInvariant) {
  std::mt19937 rng(29);
  const Mat3 r = random_rotation(rng);
  const Mat6 q = mandel_rotation(r);
  const Mat6 c = isotropic_stiffness(3.0, 1.5).mandel();
  EXPECT_LT((q * c * q.transpose() - c).norm(), 1e-12);
}

TEST(CartesianComponentTest, IsotropicValues) {
  const double bulk = 2.0, shear = 5.0;
  const Mat6 c = isotropic_stiffness(bulk, shear).mandel();
  EXPECT_NEAR(cartesian_component(c, 0, 0, 0, 0), bulk + 4.0 * shear / 3.0, 1e-13);
  EXPECT_NEAR(cartesian_component(c, 0, 0, 1, 1), bulk - 2.0 * shear / 3.0, 1e-13);
  EXPECT_NEAR(cartesian_component(c, 0, 1, 0, 1), shear, 1e-13);
  EXPECT_NEAR(cartesian_component(c, 0, 1, 1, 0), shear, 1e-13);
  EXPECT_NEAR(cartesian_component(c, 0, 0, 0, 1), 0, 1e-13);
}

}  // namespace
}  // namespace dmn
