#include "dmn/laminate.hpp"

#include <array>

#include "dmn/dual.hpp"

namespace dmn {

namespace {

// Lamination projector entries as a function of the (unit) normal; templated
// so the reverse pass can seed the normal with dual numbers. Mirrors
// lamination_projector in tensor.cpp entry for entry.
template <typename T>
std::array<std::array<T, 6>, 6> projector_entries(const std::array<T, 3>& v) {
  auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  std::array<std::array<T, 6>, 6> p;
  for (int a = 0; a < 6; ++a) {
    const int m = kIndexPairs[a][0], n = kIndexPairs[a][1];
    for (int b = 0; b < 6; ++b) {
      const int o = kIndexPairs[b][0], q = kIndexPairs[b][1];
      const T val = 0.5 * (v[m] * (delta(n, o) * v[q]) + v[n] * (delta(m, o) * v[q]) +
                           v[m] * (delta(n, q) * v[o]) + v[n] * (delta(m, q) * v[o])) -
                    v[m] * v[n] * v[o] * v[q];
      p[a][b] = (mandel_scale(a) * mandel_scale(b)) * val;
    }
  }
  return p;
}

double max_eigenvalue(const StiffnessMatrix& c) {
  const Vec6 ev = eig_sym(c.mandel());
  return ev[5];
}

}  // namespace

StiffnessMatrix laminate_stiffness(const StiffnessMatrix& c_first,
                                   const StiffnessMatrix& c_second, double c1,
                                   const UnitVector3& normal, LaminateWorkspace* ws,
                                   double lambda_scale) {
  LaminateWorkspace local;
  LaminateWorkspace& w = ws ? *ws : local;

  w.lambda = lambda_scale * std::max(max_eigenvalue(c_first), max_eigenvalue(c_second));
  w.projector = lamination_projector(normal);

  const StiffnessMatrix* phases[2] = {&c_first, &c_second};
  const double fractions[2] = {c1, 1.0 - c1};
  Mat6 y = Mat6::Zero();
  for (int i = 0; i < 2; ++i) {
    w.m_inv[i] = (phases[i]->mandel() - w.lambda * Mat6::Identity()).inverse();
    w.y_i[i] = (w.projector + w.lambda * w.m_inv[i]).inverse();
    y += fractions[i] * w.y_i[i];
  }
  w.y_inv = y.inverse();
  const Mat6 z = w.y_inv - w.projector;
  w.z_inv = z.inverse();
  return StiffnessMatrix(w.lambda * Mat6::Identity() + w.lambda * w.z_inv);
}

LaminateAdjoint laminate_pullback(const Mat6& seed, const LaminateWorkspace& w,
                                  const UnitVector3& normal, double c1) {
  LaminateAdjoint out;
  const double lambda = w.lambda;

  // C_eff = lambda I + lambda Z^{-1}
  const Mat6 adj_z = -lambda * w.z_inv.transpose() * seed * w.z_inv.transpose();
  // Z = Y^{-1} - P
  const Mat6 y_inv_t = w.y_inv.transpose();
  const Mat6 adj_y = -y_inv_t * adj_z * y_inv_t;
  Mat6 adj_p = -adj_z;
  // Y = c1 Y_1 + c2 Y_2
  out.adj_c1 = (adj_y.array() * (w.y_i[0] - w.y_i[1]).array()).sum();
  const double fractions[2] = {c1, 1.0 - c1};
  for (int i = 0; i < 2; ++i) {
    const Mat6 adj_yi = fractions[i] * adj_y;
    // Y_i = (P + lambda M_i^{-1})^{-1}
    const Mat6 adj_arg = -w.y_i[i].transpose() * adj_yi * w.y_i[i].transpose();
    adj_p += adj_arg;
    // X_i = lambda M_i^{-1}, M_i = C_i - lambda I
    const Mat6 adj_c = -lambda * w.m_inv[i].transpose() * adj_arg * w.m_inv[i].transpose();
    (i == 0 ? out.adj_first : out.adj_second) = adj_c;
  }

  // Chain through the projector's dependence on the unit normal.
  using D3 = Dual<3>;
  std::array<D3, 3> n_dual;
  for (int j = 0; j < 3; ++j) n_dual[j] = D3::seeded(normal[j], j);
  const auto p_dual = projector_entries<D3>(n_dual);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) out.adj_normal += adj_p(a, b) * p_dual[a][b].d;
  return out;
}

}  // namespace dmn
