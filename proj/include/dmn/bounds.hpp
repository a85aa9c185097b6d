#pragma once

#include "dmn/tensor.hpp"

namespace dmn {

// Arithmetic (Voigt) and harmonic (Reuss) two-phase mixtures. For any
// microstructure with these constituents the effective stiffness lies
// between them in the quadratic-form sense.
StiffnessMatrix voigt_average(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second,
                              double fraction_first);
StiffnessMatrix reuss_average(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second,
                              double fraction_first);

// Dimensionless slack of the ordering lower <= upper: smallest eigenvalue of
// the symmetrized difference, divided by the larger Frobenius norm. Negative
// values mean the ordering is violated by that relative amount.
double ordering_slack(const StiffnessMatrix& lower, const StiffnessMatrix& upper);

struct ModuliInterval {
  double lower = 0;
  double upper = 0;

  bool contains(double value, double slack = 0) const {
    return value >= lower - slack && value <= upper + slack;
  }
};

struct HashinShtrikmanBounds {
  ModuliInterval bulk;
  ModuliInterval shear;
};

// Tightest bounds on the effective bulk and shear moduli of a statistically
// isotropic two-phase mix of isotropic constituents (Walpole's reference-medium
// form, valid whether or not the phases are well ordered). Requires positive
// moduli and a fraction in [0, 1].
HashinShtrikmanBounds hashin_shtrikman_bounds(const IsotropicModuli& first,
                                              const IsotropicModuli& second,
                                              double fraction_first);

}  // namespace dmn
