#pragma once

#include "dmn/tensor.hpp"

namespace dmn {

// Intermediates of one laminate evaluation, kept for the reverse pass.
struct LaminateWorkspace {
  double lambda = 0;
  Mat6 m_inv[2];  // (C_i - lambda I)^{-1}
  Mat6 y_i[2];    // (P + lambda (C_i - lambda I)^{-1})^{-1}
  Mat6 y_inv = Mat6::Zero();
  Mat6 z_inv = Mat6::Zero();
  Mat6 projector = Mat6::Zero();
};

// Effective stiffness of a rank-one laminate: c1 parts of the first phase and
// 1 - c1 of the second, layered normal to the given direction. The reference
// multiplier lambda is lambda_scale times the largest eigenvalue of either
// input; any scale > 1 keeps every resolvent well conditioned, and the result
// does not depend on the choice.
StiffnessMatrix laminate_stiffness(const StiffnessMatrix& c_first,
                                   const StiffnessMatrix& c_second, double c1,
                                   const UnitVector3& normal, LaminateWorkspace* ws = nullptr,
                                   double lambda_scale = 2.0);

// Gradients of a scalar objective through one laminate evaluation.
struct LaminateAdjoint {
  Mat6 adj_first = Mat6::Zero();
  Mat6 adj_second = Mat6::Zero();
  double adj_c1 = 0;
  Vec3 adj_normal = Vec3::Zero();  // with respect to the unit normal
};

// Reverse pass: seed is d(objective)/d(C_eff); ws, normal and c1 must be the
// ones used in the forward call. lambda is held fixed, which is consistent
// because the result is lambda-independent.
LaminateAdjoint laminate_pullback(const Mat6& seed, const LaminateWorkspace& ws,
                                  const UnitVector3& normal, double c1);

}  // namespace dmn
