#include "dmn/tensor.hpp"

#include <algorithm>

namespace dmn {

Mat6 projector_spherical() {
  Mat6 p = Mat6::Zero();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p(a, b) = 1.0 / 3.0;
  return p;
}

Mat6 projector_deviatoric() { return Mat6::Identity() - projector_spherical(); }

IsotropicModuli moduli_from_young_poisson(double E, double nu) {
  return {E / (3.0 * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))};
}

StiffnessMatrix isotropic_stiffness(double bulk, double shear) {
  return StiffnessMatrix(3.0 * bulk * projector_spherical() +
                         2.0 * shear * projector_deviatoric());
}

IsotropicModuli isotropic_projection(const StiffnessMatrix& c) {
  const Mat6& m = c.mandel();
  const double tr_p1 = (projector_spherical() * m).trace();  // = 3K
  const double tr_p2 = (projector_deviatoric() * m).trace(); // = 10G
  return {tr_p1 / 3.0, tr_p2 / 10.0};
}

double cartesian_component(const Mat6& c, int i, int j, int k, int l) {
  const int a = SymTensor::mandel_index(i, j);
  const int b = SymTensor::mandel_index(k, l);
  return c(a, b) / (mandel_scale(a) * mandel_scale(b));
}

Mat6 lamination_projector(const UnitVector3& n) {
  const Vec3& v = n.vec();
  auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  Mat6 p;
  for (int a = 0; a < 6; ++a) {
    const int m = kIndexPairs[a][0], nn = kIndexPairs[a][1];
    for (int b = 0; b < 6; ++b) {
      const int o = kIndexPairs[b][0], q = kIndexPairs[b][1];
      const double val =
          0.5 * (v[m] * delta(nn, o) * v[q] + v[nn] * delta(m, o) * v[q] +
                 v[m] * delta(nn, q) * v[o] + v[nn] * delta(m, q) * v[o]) -
          v[m] * v[nn] * v[o] * v[q];
      p(a, b) = mandel_scale(a) * mandel_scale(b) * val;
    }
  }
  return p;
}

Eigen::Matrix<double, 6, 3> sym_dyad_matrix(const Vec3& n) {
  Eigen::Matrix<double, 6, 3> s;
  const double r = 1.0 / kSqrt2;
  s << n[0], 0, 0,
      0, n[1], 0,
      0, 0, n[2],
      r * n[1], r * n[0], 0,
      r * n[2], 0, r * n[0],
      0, r * n[2], r * n[1];
  return s;
}

Vec6 eig_sym(const Mat6& m) { return eig_sym(m, nullptr); }

Vec6 eig_sym(const Mat6& m, Mat6* vectors) {
  Mat6 a = 0.5 * (m + m.transpose());
  Mat6 v = Mat6::Identity();
  const double scale = std::max(a.norm(), 1e-300);
  constexpr int max_sweeps = 50;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (int p = 0; p < 6; ++p)
      for (int q = p + 1; q < 6; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-15 * scale) break;
    for (int p = 0; p < 6; ++p) {
      for (int q = p + 1; q < 6; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < 6; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 6; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < 6; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::array<int, 6> order = {0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  Vec6 ev;
  for (int i = 0; i < 6; ++i) ev[i] = a(order[i], order[i]);
  if (vectors) {
    for (int i = 0; i < 6; ++i) vectors->col(i) = v.col(order[i]);
  }
  return ev;
}

Mat6 mandel_rotation(const Mat3& r) {
  Mat6 q;
  for (int a = 0; a < 6; ++a) {
    const int i = kIndexPairs[a][0], j = kIndexPairs[a][1];
    for (int b = 0; b < 6; ++b) {
      const int k = kIndexPairs[b][0], l = kIndexPairs[b][1];
      double val = 0.5 * (r(i, k) * r(j, l) + r(i, l) * r(j, k));
      q(a, b) = mandel_scale(a) * mandel_scale(b) * val;
    }
  }
  return q;
}

}  // namespace dmn
