#include "dmn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmn {

namespace {

void check_fraction(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("phase fraction must lie in [0, 1]");
  }
}

// Shifted harmonic mean 1/(c1/(x1+a) + c2/(x2+a)) - a. Evaluating it at the
// extremal shear (for bulk) or extremal-phase zeta (for shear) shifts yields
// the Hashin-Shtrikman bounds; the shift keeps every denominator positive.
double shifted_harmonic(double x1, double x2, double c1, double shift) {
  const double c2 = 1.0 - c1;
  return 1.0 / (c1 / (x1 + shift) + c2 / (x2 + shift)) - shift;
}

double zeta(double bulk, double shear) {
  return shear / 6.0 * (9.0 * bulk + 8.0 * shear) / (bulk + 2.0 * shear);
}

}  // namespace

StiffnessMatrix voigt_average(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second,
                              double fraction_first) {
  check_fraction(fraction_first);
  return c_first * fraction_first + c_second * (1.0 - fraction_first);
}

StiffnessMatrix reuss_average(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second,
                              double fraction_first) {
  check_fraction(fraction_first);
  if (fraction_first == 0.0) return c_second;
  if (fraction_first == 1.0) return c_first;
  return (c_first.inverse() * fraction_first + c_second.inverse() * (1.0 - fraction_first))
      .inverse();
}

double ordering_slack(const StiffnessMatrix& lower, const StiffnessMatrix& upper) {
  const Mat6 diff = upper.mandel() - lower.mandel();
  const Vec6 eigs = eig_sym(0.5 * (diff + diff.transpose()));
  const double scale = std::max({lower.norm_fro(), upper.norm_fro(), 1e-300});
  return eigs[0] / scale;
}

HashinShtrikmanBounds hashin_shtrikman_bounds(const IsotropicModuli& first,
                                              const IsotropicModuli& second,
                                              double fraction_first) {
  check_fraction(fraction_first);
  if (!(first.bulk > 0 && first.shear > 0 && second.bulk > 0 && second.shear > 0)) {
    throw std::invalid_argument("Hashin-Shtrikman bounds require positive phase moduli");
  }
  const double k_lo = std::min(first.bulk, second.bulk);
  const double k_hi = std::max(first.bulk, second.bulk);
  const double g_lo = std::min(first.shear, second.shear);
  const double g_hi = std::max(first.shear, second.shear);

  HashinShtrikmanBounds b;
  b.bulk.lower = shifted_harmonic(first.bulk, second.bulk, fraction_first, 4.0 / 3.0 * g_lo);
  b.bulk.upper = shifted_harmonic(first.bulk, second.bulk, fraction_first, 4.0 / 3.0 * g_hi);
  b.shear.lower = shifted_harmonic(first.shear, second.shear, fraction_first, zeta(k_lo, g_lo));
  b.shear.upper = shifted_harmonic(first.shear, second.shear, fraction_first, zeta(k_hi, g_hi));
  return b;
}

}  // namespace dmn
