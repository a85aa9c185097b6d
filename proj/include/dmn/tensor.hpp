#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dmn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kSqrt2 = 1.4142135623730950488;

// Component ordering of the orthonormal (Mandel) 6-vector basis:
// (11, 22, 33, 12, 13, 23), shear entries scaled by sqrt(2) so that the
// Euclidean dot product of coordinate vectors equals the tensor double
// contraction and 6x6 matrix algebra composes like fourth-order tensor
// algebra on symmetric arguments.
inline constexpr std::array<std::array<int, 2>, 6> kIndexPairs = {
    {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};

inline double mandel_scale(int a) { return a < 3 ? 1.0 : kSqrt2; }

// Symmetric second-order tensor in Mandel coordinates.
class SymTensor {
 public:
  SymTensor() : v_(Vec6::Zero()) {}
  explicit SymTensor(const Vec6& mandel) : v_(mandel) {}

  static SymTensor zero() { return SymTensor(); }
  static SymTensor identity() { return SymTensor(Vec6{1, 1, 1, 0, 0, 0}); }

  // From physical tensor components (the off-diagonal arguments are the
  // tensor components, not the scaled coordinates).
  static SymTensor from_components(double e11, double e22, double e33, double e12, double e13,
                                   double e23) {
    return SymTensor(Vec6{e11, e22, e33, kSqrt2 * e12, kSqrt2 * e13, kSqrt2 * e23});
  }

  static SymTensor from_matrix(const Mat3& m) {
    return from_components(m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)),
                           0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1)));
  }

  // sym(a (x) n), the symmetrized dyad.
  static SymTensor sym_dyad(const Vec3& a, const Vec3& n) {
    return from_components(a[0] * n[0], a[1] * n[1], a[2] * n[2],
                           0.5 * (a[0] * n[1] + a[1] * n[0]), 0.5 * (a[0] * n[2] + a[2] * n[0]),
                           0.5 * (a[1] * n[2] + a[2] * n[1]));
  }

  const Vec6& mandel() const { return v_; }
  Vec6& mandel() { return v_; }

  // Physical component t_ij.
  double operator()(int i, int j) const {
    if (i == j) return v_[i];
    const int a = mandel_index(i, j);
    return v_[a] / kSqrt2;
  }

  Mat3 to_matrix() const {
    Mat3 m;
    m << v_[0], v_[3] / kSqrt2, v_[4] / kSqrt2, v_[3] / kSqrt2, v_[1], v_[5] / kSqrt2,
        v_[4] / kSqrt2, v_[5] / kSqrt2, v_[2];
    return m;
  }

  double trace() const { return v_[0] + v_[1] + v_[2]; }
  double dot(const SymTensor& o) const { return v_.dot(o.v_); }
  double norm() const { return v_.norm(); }

  SymTensor dev() const {
    const double m = trace() / 3.0;
    Vec6 d = v_;
    d[0] -= m;
    d[1] -= m;
    d[2] -= m;
    return SymTensor(d);
  }

  SymTensor sph() const {
    const double m = trace() / 3.0;
    return SymTensor(Vec6{m, m, m, 0, 0, 0});
  }

  // Eigenvalues of the 3x3 tensor, ascending.
  Vec3 eigenvalues3() const {
    Eigen::SelfAdjointEigenSolver<Mat3> es(to_matrix(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  SymTensor operator+(const SymTensor& o) const { return SymTensor(v_ + o.v_); }
  SymTensor operator-(const SymTensor& o) const { return SymTensor(v_ - o.v_); }
  SymTensor operator-() const { return SymTensor(-v_); }
  SymTensor operator*(double s) const { return SymTensor(v_ * s); }
  SymTensor& operator+=(const SymTensor& o) {
    v_ += o.v_;
    return *this;
  }
  SymTensor& operator-=(const SymTensor& o) {
    v_ -= o.v_;
    return *this;
  }
  SymTensor& operator*=(double s) {
    v_ *= s;
    return *this;
  }

  static int mandel_index(int i, int j) {
    static constexpr int map[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
    return map[i][j];
  }

 private:
  Vec6 v_;
};

inline SymTensor operator*(double s, const SymTensor& t) { return t * s; }

// Fourth-order tensor with minor symmetries in Mandel 6x6 coordinates.
class StiffnessMatrix {
 public:
  StiffnessMatrix() : m_(Mat6::Zero()) {}
  explicit StiffnessMatrix(const Mat6& m) : m_(m) {}

  static StiffnessMatrix zero() { return StiffnessMatrix(); }
  static StiffnessMatrix identity() { return StiffnessMatrix(Mat6::Identity()); }

  const Mat6& mandel() const { return m_; }
  Mat6& mandel() { return m_; }

  SymTensor apply(const SymTensor& t) const { return SymTensor(m_ * t.mandel()); }
  SymTensor operator*(const SymTensor& t) const { return apply(t); }

  StiffnessMatrix operator+(const StiffnessMatrix& o) const { return StiffnessMatrix(m_ + o.m_); }
  StiffnessMatrix operator-(const StiffnessMatrix& o) const { return StiffnessMatrix(m_ - o.m_); }
  StiffnessMatrix operator*(double s) const { return StiffnessMatrix(m_ * s); }
  StiffnessMatrix operator*(const StiffnessMatrix& o) const {
    return StiffnessMatrix(m_ * o.m_);
  }

  StiffnessMatrix inverse() const { return StiffnessMatrix(m_.inverse()); }
  StiffnessMatrix transpose() const { return StiffnessMatrix(m_.transpose()); }
  double norm_fro() const { return m_.norm(); }

  // Entrywise l^p norm of the coordinate matrix (p >= 1).
  double norm_entrywise(double p) const {
    double s = 0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) s += std::pow(std::abs(m_(a, b)), p);
    return std::pow(s, 1.0 / p);
  }

 private:
  Mat6 m_;
};

inline StiffnessMatrix operator*(double s, const StiffnessMatrix& c) { return c * s; }

// Spherical projector: rank 1, picks the hydrostatic part.
Mat6 projector_spherical();
// Deviatoric projector: rank 5, complements the spherical one.
Mat6 projector_deviatoric();

struct IsotropicModuli {
  double bulk = 0;   // K
  double shear = 0;  // G
};

IsotropicModuli moduli_from_young_poisson(double E, double nu);

// C = 3K P1 + 2G P2.
StiffnessMatrix isotropic_stiffness(double bulk, double shear);

// Orthogonal projection of a stiffness onto the isotropic subspace.
IsotropicModuli isotropic_projection(const StiffnessMatrix& c);

// Direction on the unit sphere; normalizes on construction.
class UnitVector3 {
 public:
  explicit UnitVector3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-300)) throw std::invalid_argument("UnitVector3: zero direction");
    v_ = v / n;
  }

  const Vec3& vec() const { return v_; }
  double operator[](int i) const { return v_[i]; }

  // n and -n describe the same laminate; fix the sign by making the first
  // nonzero component positive so serialized models are stable.
  UnitVector3 canonical() const {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(v_[i]) > 1e-14) return v_[i] > 0 ? *this : UnitVector3(-v_);
    }
    return *this;
  }

 private:
  Vec3 v_;
};

// Orthogonal projector onto { sym(a (x) n) : a in R^3 }. Idempotent, rank 3.
Mat6 lamination_projector(const UnitVector3& n);

// 6x3 matrix of the linear map a -> sym(a (x) n) in Mandel coordinates.
Eigen::Matrix<double, 6, 3> sym_dyad_matrix(const Vec3& n);

// Eigenvalues of a symmetric 6x6 matrix by cyclic Jacobi sweeps, ascending.
// Deterministic; no external solver involved.
Vec6 eig_sym(const Mat6& m);
// Same, also accumulating eigenvectors (columns match eigenvalue order).
Vec6 eig_sym(const Mat6& m, Mat6* vectors);

// Rotation of Mandel coordinates: returns the 6x6 matrix Q with
// (R t R^T)_mandel = Q * t_mandel for every symmetric t.
Mat6 mandel_rotation(const Mat3& r);

// Cartesian components C_ijkl from the Mandel coordinate matrix.
double cartesian_component(const Mat6& c, int i, int j, int k, int l);

}  // namespace dmn
