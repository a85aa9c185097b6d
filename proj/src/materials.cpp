#include "dmn/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dmn/dual.hpp"
#include "dmn/errors.hpp"

namespace dmn {

namespace {

constexpr double kLn10 = 2.302585092994045684;
constexpr double kSqrt32 = 1.2247448713915890491;  // sqrt(3/2)
constexpr double kEpsPFloor = 1e-12;               // hardening regularization

template <typename T>
using TV6 = std::array<T, 6>;

template <typename T>
T tv_dot(const TV6<T>& a, const TV6<T>& b) {
  T s = a[0] * b[0];
  for (int k = 1; k < 6; ++k) s += a[k] * b[k];
  return s;
}

// Plain-data snapshot handed to the step kernel.
struct Pa66Model {
  double bulk_inf, shear_inf;
  int n;
  const double* bulk;
  const double* shear;
  const double* tau_bulk;
  const double* tau_shear;
  double wlf_c1, wlf_c2;
  double yield0, hard_k, hard_n, eta0, rate_m;
  double beta1, beta2, theta_ref;
  double alpha0, theta0;
};

template <typename T>
T hardening_value(const Pa66Model& m, const T& gamma1, const T& eps_p) {
  return gamma1 * m.hard_k * pow(max(eps_p, kEpsPFloor), m.hard_n);
}

// Residual of the scalar return map in the plastic increment x:
// R(x) = x - dt (sigY/eta) < (sigeq_tr - 3 Ghat x - sigY - H(eps_p0 + x)) / sigY >^m
template <typename T>
T plastic_residual(const Pa66Model& m, const T& x, const T& sigeq_tr, const T& g_hat,
                   const T& sig_y, const T& eta, const T& gamma1, double eps_p0, double dt) {
  const T h = gamma1 * m.hard_k * pow(max(eps_p0 + x, kEpsPFloor), m.hard_n);
  const T arg = (sigeq_tr - 3.0 * g_hat * x - sig_y - h) / sig_y;
  if (!(value_of(arg) > 0)) return x;
  return x - dt * (sig_y / eta) * pow(arg, m.rate_m);
}

double plastic_residual_prime(const Pa66Model& m, double x, double sigeq_tr, double g_hat,
                              double sig_y, double eta, double gamma1, double eps_p0, double dt) {
  const double e = eps_p0 + x;
  const double ee = std::max(e, kEpsPFloor);
  const double h = gamma1 * m.hard_k * std::pow(ee, m.hard_n);
  const double hp = e > kEpsPFloor ? gamma1 * m.hard_k * m.hard_n * std::pow(ee, m.hard_n - 1.0) : 0.0;
  const double arg = (sigeq_tr - 3.0 * g_hat * x - sig_y - h) / sig_y;
  if (!(arg > 0)) return 1.0;
  const double phi_g = dt * m.rate_m * std::pow(arg, m.rate_m - 1.0) / eta;
  return 1.0 + phi_g * (3.0 * g_hat + hp);
}

// Newton with a bisection safeguard on the bracketed, monotone residual.
double solve_plastic_increment(const Pa66Model& m, double sigeq_tr, double g_hat, double sig_y,
                               double eta, double gamma1, double eps_p0, double dt) {
  const double h0 = gamma1 * m.hard_k * std::pow(std::max(eps_p0, kEpsPFloor), m.hard_n);
  double hi = (sigeq_tr - sig_y - h0) / (3.0 * g_hat);  // argument vanishes at or before hi
  double lo = 0.0;
  const double tol = 1e-14 * std::max(hi, 1e-12);
  double x = 0.0;
  double r = plastic_residual<double>(m, x, sigeq_tr, g_hat, sig_y, eta, gamma1, eps_p0, dt);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(r) <= tol) return x;
    if (r < 0)
      lo = x;
    else
      hi = x;
    const double rp = plastic_residual_prime(m, x, sigeq_tr, g_hat, sig_y, eta, gamma1, eps_p0, dt);
    double xn = x - r / rp;
    if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi);
    x = xn;
    r = plastic_residual<double>(m, x, sigeq_tr, g_hat, sig_y, eta, gamma1, eps_p0, dt);
  }
  throw ConvergenceError("plastic return map did not converge", 200, {r});
}

// Return-map solve lifted to dual arguments via the implicit function theorem:
// the value part comes from the scalar Newton, the derivative part from
// dx = -(dR/dp . dp) / (dR/dx) at the solution.
template <typename T>
T plastic_increment(const Pa66Model& m, const T& sigeq_tr, const T& g_hat, const T& sig_y,
                    const T& eta, const T& gamma1, double eps_p0, double dt) {
  const double xv =
      solve_plastic_increment(m, value_of(sigeq_tr), value_of(g_hat), value_of(sig_y),
                              value_of(eta), value_of(gamma1), eps_p0, dt);
  if constexpr (is_dual_v<T>) {
    const T r = plastic_residual<T>(m, T(xv), sigeq_tr, g_hat, sig_y, eta, gamma1, eps_p0, dt);
    const double rp =
        plastic_residual_prime(m, xv, value_of(sigeq_tr), value_of(g_hat), value_of(sig_y),
                               value_of(eta), value_of(gamma1), eps_p0, dt);
    return T(xv, -r.d / rp);
  } else {
    return xv;
  }
}

// Byproducts of the return map used by the analytic consistent tangent.
struct TangentAux {
  bool plastic = false;
  double bulk_hat = 0;
  double shear_hat = 0;
  double beta = 0;    // fraction of the trial deviator removed by plastic flow
  double gamma1 = 0;  // d(deps_p) / d(sigeq_tr)
  Vec6 flow_dir = Vec6::Zero();
};

// One implicit-Euler step. The viscous branch updates are linear in the
// unknown strains, so they are eliminated in closed form; the viscoplastic
// correction then reduces to a radial return on the combined trial deviator
// with the algorithmic shear modulus, solved by a single scalar Newton.
template <typename T>
void pa66_step(const Pa66Model& m, const TV6<T>& eps, const T& theta, double dt,
               const MaterialState& z0, const Vec6* eps_prev, TV6<T>& stress_out, T* coupling_out,
               T* dissipation_out, TangentAux* aux, MaterialState* z_out) {
  // Temperature factors.
  const T d_theta = theta - m.theta_ref;
  const T a_th = exp(kLn10 * (-(m.wlf_c1 * d_theta) / (m.wlf_c2 + d_theta)));
  const T gamma1 = exp(-m.beta1 * d_theta);
  const T gamma2 = exp(-m.beta2 * d_theta);
  const T sig_y = gamma1 * m.yield0;
  const T eta = gamma2 * m.eta0;

  // Spherical / deviatoric split of the strain argument.
  const T tr_eps = eps[0] + eps[1] + eps[2];
  const T e_s = tr_eps / 3.0 - m.alpha0 * (theta - m.theta0);  // mean elastic driver
  TV6<T> dev_eps = eps;
  {
    const T mmean = tr_eps / 3.0;
    dev_eps[0] -= mmean;
    dev_eps[1] -= mmean;
    dev_eps[2] -= mmean;
  }

  // Closed-form elimination of the viscous strains: algorithmic moduli and
  // combined trial deviator.
  T g_hat = T(m.shear_inf);
  T k_hat = T(m.bulk_inf);
  TV6<T> s_tr;
  for (int k = 0; k < 6; ++k) s_tr[k] = T(0.0);
  for (int i = 0; i < m.n; ++i) {
    const T rg = dt / (a_th * m.tau_shear[i]);
    const T rk = dt / (a_th * m.tau_bulk[i]);
    const T gg = m.shear[i] / (1.0 + rg);
    g_hat += gg;
    k_hat += m.bulk[i] / (1.0 + rk);
    const SymTensor d_n = z0.viscous_strains[i].dev();
    for (int k = 0; k < 6; ++k) s_tr[k] -= (2.0 * gg) * d_n.mandel()[k];
  }
  for (int k = 0; k < 6; ++k)
    s_tr[k] += (2.0 * g_hat) * (dev_eps[k] - z0.viscoplastic_strain.mandel()[k]);

  const T norm_str = sqrt(max(tv_dot(s_tr, s_tr), 1e-300));
  const T sigeq_tr = kSqrt32 * norm_str;

  // Viscoplastic radial return on the trial deviator.
  const T h0 = hardening_value(m, gamma1, T(z0.plastic_strain));
  T deps_p = T(0.0);
  const bool plastic = value_of(sigeq_tr - sig_y - h0) > 0;
  if (plastic)
    deps_p = plastic_increment<T>(m, sigeq_tr, g_hat, sig_y, eta, gamma1, z0.plastic_strain, dt);

  TV6<T> flow_dir;
  TV6<T> eps_vp_new;
  TV6<T> sigma_dev = s_tr;
  for (int k = 0; k < 6; ++k) {
    flow_dir[k] = plastic ? s_tr[k] / norm_str : T(0.0);
    eps_vp_new[k] = z0.viscoplastic_strain.mandel()[k] + kSqrt32 * deps_p * flow_dir[k];
    sigma_dev[k] -= 2.0 * g_hat * kSqrt32 * deps_p * flow_dir[k];
  }

  // Mean stress: the spherical viscous branches relax independently.
  T sig_mean = T(m.bulk_inf) * e_s;
  for (int i = 0; i < m.n; ++i) {
    const T rk = dt / (a_th * m.tau_bulk[i]);
    const double s_n = z0.viscous_strains[i].trace() / 3.0;
    const T s_new = (s_n + rk * e_s) / (1.0 + rk);
    sig_mean += m.bulk[i] * (e_s - s_new);
  }
  sig_mean = 3.0 * sig_mean;

  for (int k = 0; k < 6; ++k) stress_out[k] = sigma_dev[k] + (k < 3 ? sig_mean : T(0.0));

  if (aux) {
    aux->plastic = plastic;
    aux->bulk_hat = value_of(k_hat);
    aux->shear_hat = value_of(g_hat);
    aux->gamma1 = 0;
    aux->beta = 0;
    if (plastic) {
      const double e_sol = z0.plastic_strain + value_of(deps_p);
      const double ee = std::max(e_sol, kEpsPFloor);
      const double hp = e_sol > kEpsPFloor ? value_of(gamma1) * m.hard_k * m.hard_n *
                                                 std::pow(ee, m.hard_n - 1.0)
                                           : 0.0;
      const double h_sol = value_of(gamma1) * m.hard_k * std::pow(ee, m.hard_n);
      const double arg =
          (value_of(sigeq_tr) - 3.0 * value_of(g_hat) * value_of(deps_p) - value_of(sig_y) - h_sol) /
          value_of(sig_y);
      const double phi_g = arg > 0 ? dt * m.rate_m * std::pow(arg, m.rate_m - 1.0) / value_of(eta) : 0.0;
      aux->gamma1 = phi_g / (1.0 + phi_g * (3.0 * value_of(g_hat) + hp));
      aux->beta = 2.0 * value_of(g_hat) * kSqrt32 * value_of(deps_p) / value_of(norm_str);
      for (int k = 0; k < 6; ++k) aux->flow_dir[k] = value_of(flow_dir[k]);
    }
  }

  if (!coupling_out && !dissipation_out && !z_out) return;

  // Per-branch recovery of the updated viscous strains, dissipation, and the
  // thermomechanical coupling source (discrete rates).
  const T ep_rate = deps_p / dt;
  T diss = sig_y * ep_rate;
  T tr_visc_coupling = T(0.0);  // sum_i 3 K_i (tr_ed - 3 s_rate_i)
  if (z_out) {
    z_out->plastic_strain = z0.plastic_strain + value_of(deps_p);
    Vec6 vp;
    for (int k = 0; k < 6; ++k) vp[k] = value_of(eps_vp_new[k]);
    z_out->viscoplastic_strain = SymTensor(vp);
    z_out->viscous_strains.resize(static_cast<size_t>(m.n));
  }
  T tr_ed = T(0.0);
  if (eps_prev) tr_ed = (tr_eps - ((*eps_prev)[0] + (*eps_prev)[1] + (*eps_prev)[2])) / dt;

  for (int i = 0; i < m.n; ++i) {
    const T rg = dt / (a_th * m.tau_shear[i]);
    const T rk = dt / (a_th * m.tau_bulk[i]);
    const double s_n = z0.viscous_strains[i].trace() / 3.0;
    const SymTensor d_n = z0.viscous_strains[i].dev();
    const T s_new = (s_n + rk * e_s) / (1.0 + rk);
    const T s_rate = (s_new - s_n) / dt;
    TV6<T> d_new, d_rate, dev_x;
    for (int k = 0; k < 6; ++k) {
      d_new[k] = (d_n.mandel()[k] + rg * (dev_eps[k] - eps_vp_new[k])) / (1.0 + rg);
      d_rate[k] = (d_new[k] - d_n.mandel()[k]) / dt;
      dev_x[k] = dev_eps[k] - eps_vp_new[k] - d_new[k];
    }
    diss += 9.0 * m.bulk[i] * (e_s - s_new) * s_rate + 2.0 * m.shear[i] * tv_dot(dev_x, d_rate);
    if (eps_prev) tr_visc_coupling += 3.0 * m.bulk[i] * (tr_ed - 3.0 * s_rate);
    if (z_out) {
      Vec6 v;
      for (int k = 0; k < 6; ++k) v[k] = value_of(d_new[k]) + (k < 3 ? value_of(s_new) : 0.0);
      z_out->viscous_strains[static_cast<size_t>(i)] = SymTensor(v);
    }
  }

  if (dissipation_out) *dissipation_out = diss;
  if (coupling_out) {
    const T h_new = hardening_value(m, gamma1, T(z0.plastic_strain) + deps_p);
    *coupling_out = -theta * m.alpha0 * (3.0 * m.bulk_inf * tr_ed + tr_visc_coupling) -
                    theta * m.beta1 * h_new * ep_rate + diss;
  }
}

Mat6 assemble_pa66_tangent(const TangentAux& aux) {
  Mat6 c = 3.0 * aux.bulk_hat * projector_spherical() +
           2.0 * aux.shear_hat * projector_deviatoric();
  if (aux.plastic) {
    const double two_g = 2.0 * aux.shear_hat;
    c -= two_g * aux.beta * projector_deviatoric();
    c += (two_g * aux.beta - 6.0 * aux.shear_hat * aux.shear_hat * aux.gamma1) *
         (aux.flow_dir * aux.flow_dir.transpose());
  }
  return c;
}

}  // namespace

void ThermoelasticParameters::validate() const {
  if (!(youngs_modulus > 0)) throw std::invalid_argument("thermoelastic: modulus must be positive");
  if (!(poisson_ratio > -1 && poisson_ratio < 0.5))
    throw std::invalid_argument("thermoelastic: Poisson ratio out of range");
  if (!(heat_capacity > 0)) throw std::invalid_argument("thermoelastic: heat capacity must be positive");
  if (!(expansion >= 0)) throw std::invalid_argument("thermoelastic: expansion must be nonnegative");
  if (!(reference_temperature > 0))
    throw std::invalid_argument("thermoelastic: reference temperature must be positive");
}

void Pa66Parameters::validate() const {
  if (!(long_term_modulus > 0)) throw std::invalid_argument("pa66: long-term modulus must be positive");
  if (!(poisson_ratio > -1 && poisson_ratio < 0.5))
    throw std::invalid_argument("pa66: Poisson ratio out of range");
  for (const auto& b : branches) {
    if (!(b.modulus > 0) || !(b.tau > 0))
      throw std::invalid_argument("pa66: branch modulus and relaxation time must be positive");
  }
  if (!(wlf_c2 > 0)) throw std::invalid_argument("pa66: WLF C2 must be positive");
  if (!(yield_stress > 0)) throw std::invalid_argument("pa66: yield stress must be positive");
  if (!(hardening_modulus >= 0)) throw std::invalid_argument("pa66: hardening modulus must be nonnegative");
  if (!(hardening_exponent > 0)) throw std::invalid_argument("pa66: hardening exponent must be positive");
  if (!(viscosity > 0)) throw std::invalid_argument("pa66: viscosity must be positive");
  if (!(rate_exponent >= 1)) throw std::invalid_argument("pa66: rate exponent must be at least one");
  if (!(softening_yield >= 0) || !(softening_viscosity >= 0))
    throw std::invalid_argument("pa66: softening coefficients must be nonnegative");
  if (!(softening_reference > 0) || !(reference_temperature > 0))
    throw std::invalid_argument("pa66: reference temperatures must be positive");
  if (!(heat_capacity > 0)) throw std::invalid_argument("pa66: heat capacity must be positive");
  if (!(expansion >= 0)) throw std::invalid_argument("pa66: expansion must be nonnegative");
}

double wlf_shift(double c1, double c2, double theta_ref, double theta) {
  const double d = theta - theta_ref;
  return std::pow(10.0, -(c1 * d) / (c2 + d));
}

double temperature_degradation(double beta, double theta_ref, double theta) {
  return std::exp(-beta * (theta - theta_ref));
}

ThermoelasticMaterial::ThermoelasticMaterial(const ThermoelasticParameters& p) : p_(p) {
  p_.validate();
  const auto [bulk, shear] = moduli_from_young_poisson(p_.youngs_modulus, p_.poisson_ratio);
  stiffness_ = isotropic_stiffness(bulk, shear);
  // -C[alpha] = -3 K alpha0 1
  stress_theta_ = SymTensor(Vec6{-3.0 * bulk * p_.expansion, -3.0 * bulk * p_.expansion,
                                 -3.0 * bulk * p_.expansion, 0, 0, 0});
}

SymTensor ThermoelasticMaterial::stress(const SymTensor& strain, double theta, double,
                                        const MaterialState&) const {
  return stiffness_ * strain + stress_theta_ * (theta - p_.reference_temperature);
}

void ThermoelasticMaterial::stress_tangent(const SymTensor& strain, double theta, double dt,
                                           const MaterialState& state, SymTensor& stress_out,
                                           Mat6& tangent_out) const {
  stress_out = stress(strain, theta, dt, state);
  tangent_out = stiffness_.mandel();
}

GsmResponse ThermoelasticMaterial::respond(const SymTensor& strain, double theta, double dt,
                                           const SymTensor& strain_prev, const MaterialState& state,
                                           MaterialState& state_out) const {
  GsmResponse r;
  r.stress = stress(strain, theta, dt, state);
  r.dstress_dstrain = stiffness_.mandel();
  r.dstress_dtheta = stress_theta_;
  // D = -theta (deps/dt) : C[alpha]
  const SymTensor rate = (strain - strain_prev) * (1.0 / dt);
  r.coupling = theta * rate.dot(stress_theta_);
  r.dcoupling_dstrain = stress_theta_ * (theta / dt);
  r.dcoupling_dtheta = rate.dot(stress_theta_);
  r.dissipation = 0;
  state_out = state;
  return r;
}

Pa66Material::Pa66Material(const Pa66Parameters& p) : p_(p) {
  p_.validate();
  const auto [bulk, shear] = moduli_from_young_poisson(p_.long_term_modulus, p_.poisson_ratio);
  bulk_inf_ = bulk;
  shear_inf_ = shear;
  for (const auto& b : p_.branches) {
    const auto [bi, gi] = moduli_from_young_poisson(b.modulus, p_.poisson_ratio);
    bulk_i_.push_back(bi);
    shear_i_.push_back(gi);
    tau_bulk_.push_back(b.tau * b.modulus / bi);
    tau_shear_.push_back(b.tau * b.modulus / gi);
  }
}

namespace {
Pa66Model make_model(const Pa66Parameters& p, double bulk_inf, double shear_inf,
                     const std::vector<double>& bulk_i, const std::vector<double>& shear_i,
                     const std::vector<double>& tau_bulk, const std::vector<double>& tau_shear) {
  return Pa66Model{bulk_inf,
                   shear_inf,
                   static_cast<int>(bulk_i.size()),
                   bulk_i.data(),
                   shear_i.data(),
                   tau_bulk.data(),
                   tau_shear.data(),
                   p.wlf_c1,
                   p.wlf_c2,
                   p.yield_stress,
                   p.hardening_modulus,
                   p.hardening_exponent,
                   p.viscosity,
                   p.rate_exponent,
                   p.softening_yield,
                   p.softening_viscosity,
                   p.softening_reference,
                   p.expansion,
                   p.reference_temperature};
}
}  // namespace

SymTensor Pa66Material::stress(const SymTensor& strain, double theta, double dt,
                               const MaterialState& state) const {
  const Pa66Model m = make_model(p_, bulk_inf_, shear_inf_, bulk_i_, shear_i_, tau_bulk_, tau_shear_);
  TV6<double> eps;
  for (int k = 0; k < 6; ++k) eps[k] = strain.mandel()[k];
  TV6<double> sig;
  pa66_step<double>(m, eps, theta, dt, state, nullptr, sig, nullptr, nullptr, nullptr, nullptr);
  Vec6 v;
  for (int k = 0; k < 6; ++k) v[k] = sig[k];
  return SymTensor(v);
}

void Pa66Material::stress_tangent(const SymTensor& strain, double theta, double dt,
                                  const MaterialState& state, SymTensor& stress_out,
                                  Mat6& tangent_out) const {
  const Pa66Model m = make_model(p_, bulk_inf_, shear_inf_, bulk_i_, shear_i_, tau_bulk_, tau_shear_);
  TV6<double> eps;
  for (int k = 0; k < 6; ++k) eps[k] = strain.mandel()[k];
  TV6<double> sig;
  TangentAux aux;
  pa66_step<double>(m, eps, theta, dt, state, nullptr, sig, nullptr, nullptr, &aux, nullptr);
  Vec6 v;
  for (int k = 0; k < 6; ++k) v[k] = sig[k];
  stress_out = SymTensor(v);
  tangent_out = assemble_pa66_tangent(aux);
}

GsmResponse Pa66Material::respond(const SymTensor& strain, double theta, double dt,
                                  const SymTensor& strain_prev, const MaterialState& state,
                                  MaterialState& state_out) const {
  const Pa66Model m = make_model(p_, bulk_inf_, shear_inf_, bulk_i_, shear_i_, tau_bulk_, tau_shear_);
  using D7 = Dual<7>;
  TV6<D7> eps;
  for (int k = 0; k < 6; ++k) eps[k] = D7::seeded(strain.mandel()[k], k);
  const D7 th = D7::seeded(theta, 6);
  const Vec6 prev = strain_prev.mandel();
  TV6<D7> sig;
  D7 coupling, dissipation;
  pa66_step<D7>(m, eps, th, dt, state, &prev, sig, &coupling, &dissipation, nullptr, &state_out);

  GsmResponse r;
  for (int k = 0; k < 6; ++k) {
    r.stress.mandel()[k] = sig[k].v;
    for (int j = 0; j < 6; ++j) r.dstress_dstrain(k, j) = sig[k].d[j];
    r.dstress_dtheta.mandel()[k] = sig[k].d[6];
  }
  r.coupling = coupling.v;
  for (int j = 0; j < 6; ++j) r.dcoupling_dstrain.mandel()[j] = coupling.d[j];
  r.dcoupling_dtheta = coupling.d[6];
  r.dissipation = dissipation.v;
  return r;
}

MaterialState Pa66Material::initial_state() const {
  MaterialState s;
  s.viscous_strains.assign(p_.branches.size(), SymTensor());
  return s;
}

StiffnessMatrix Pa66Material::elastic_stiffness() const {
  double bulk = bulk_inf_, shear = shear_inf_;
  for (size_t i = 0; i < bulk_i_.size(); ++i) {
    bulk += bulk_i_[i];
    shear += shear_i_[i];
  }
  return isotropic_stiffness(bulk, shear);
}

ThermoelasticParameters glass_parameters() {
  ThermoelasticParameters p;
  p.youngs_modulus = 72.0e3;  // MPa
  p.poisson_ratio = 0.26;
  p.heat_capacity = 2.1e6;
  p.expansion = 9e-6;
  p.conductivity = 0.93;
  p.reference_temperature = 293.15;
  return p;
}

Pa66Parameters pa66_parameters() {
  Pa66Parameters p;
  p.long_term_modulus = 1.5e3;  // MPa
  p.poisson_ratio = 0.42;
  const double moduli[] = {265, 262, 248, 231, 211, 190, 170, 92, 78, 65, 54, 48};
  const double log_tau[] = {-4.22, -3.42, -2.63, -1.84, -1.05, -0.26,
                            0.53,  1.32,  2.12,  2.91,  3.70,  4.49};
  for (int i = 0; i < 12; ++i)
    p.branches.push_back({moduli[i], std::pow(10.0, log_tau[i])});
  p.wlf_c1 = 26.21;
  p.wlf_c2 = 446.31;
  p.yield_stress = 15.5;
  p.hardening_modulus = 103.0;
  p.hardening_exponent = 0.32;
  p.viscosity = 74.0;
  p.rate_exponent = 2.0;
  p.softening_yield = 0.011;
  p.softening_viscosity = 0.07;
  p.softening_reference = 298.15;
  p.heat_capacity = 1.9e6;
  p.expansion = 70e-6;
  p.conductivity = 0.27;
  p.reference_temperature = 293.15;
  return p;
}

using nlohmann::json;

nlohmann::json to_json(const ThermoelasticParameters& p) {
  return json{{"model", "thermoelastic"},
              {"E_GPa", p.youngs_modulus / 1e3},
              {"nu", p.poisson_ratio},
              {"c0_J_m3K", p.heat_capacity},
              {"alpha0_1K", p.expansion},
              {"kappa0_W_mK", p.conductivity},
              {"theta0_K", p.reference_temperature}};
}

nlohmann::json to_json(const Pa66Parameters& p) {
  json branches = json::array();
  for (const auto& b : p.branches)
    branches.push_back(json{{"E_MPa", b.modulus}, {"tau_log10_s", std::log10(b.tau)}});
  return json{{"model", "pa66_viscoplastic"},
              {"E_inf_GPa", p.long_term_modulus / 1e3},
              {"nu", p.poisson_ratio},
              {"maxwell_branches", branches},
              {"wlf", json{{"C1", p.wlf_c1}, {"C2_K", p.wlf_c2}}},
              {"plasticity", json{{"sigma_Y0_MPa", p.yield_stress},
                                  {"k_MPa", p.hardening_modulus},
                                  {"n", p.hardening_exponent},
                                  {"eta0_MPa_s", p.viscosity},
                                  {"m", p.rate_exponent}}},
              {"thermal_softening", json{{"beta1_1K", p.softening_yield},
                                         {"beta2_1K", p.softening_viscosity},
                                         {"theta_ref_K", p.softening_reference}}},
              {"c0_J_m3K", p.heat_capacity},
              {"alpha0_1K", p.expansion},
              {"kappa0_W_mK", p.conductivity},
              {"theta0_K", p.reference_temperature}};
}

namespace {
double require_number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw IoError(std::string("material file: missing or non-numeric field '") + key + "'");
  return j.at(key).get<double>();
}
}  // namespace

std::unique_ptr<GsmMaterial> material_from_json(const json& j) {
  if (!j.is_object() || !j.contains("model") || !j.at("model").is_string())
    throw IoError("material file: expected an object with a 'model' string");
  const std::string model = j.at("model").get<std::string>();
  try {
    if (model == "thermoelastic") {
      ThermoelasticParameters p;
      p.youngs_modulus = require_number(j, "E_GPa") * 1e3;
      p.poisson_ratio = require_number(j, "nu");
      p.heat_capacity = require_number(j, "c0_J_m3K");
      p.expansion = require_number(j, "alpha0_1K");
      p.conductivity = j.value("kappa0_W_mK", 0.0);
      p.reference_temperature = require_number(j, "theta0_K");
      return std::make_unique<ThermoelasticMaterial>(p);
    }
    if (model == "pa66_viscoplastic") {
      Pa66Parameters p;
      p.long_term_modulus = require_number(j, "E_inf_GPa") * 1e3;
      p.poisson_ratio = require_number(j, "nu");
      if (!j.contains("maxwell_branches") || !j.at("maxwell_branches").is_array())
        throw IoError("material file: 'maxwell_branches' array required");
      for (const auto& b : j.at("maxwell_branches"))
        p.branches.push_back(
            {require_number(b, "E_MPa"), std::pow(10.0, require_number(b, "tau_log10_s"))});
      const json& wlf = j.at("wlf");
      p.wlf_c1 = require_number(wlf, "C1");
      p.wlf_c2 = require_number(wlf, "C2_K");
      const json& pl = j.at("plasticity");
      p.yield_stress = require_number(pl, "sigma_Y0_MPa");
      p.hardening_modulus = require_number(pl, "k_MPa");
      p.hardening_exponent = require_number(pl, "n");
      p.viscosity = require_number(pl, "eta0_MPa_s");
      p.rate_exponent = require_number(pl, "m");
      const json& ts = j.at("thermal_softening");
      p.softening_yield = require_number(ts, "beta1_1K");
      p.softening_viscosity = require_number(ts, "beta2_1K");
      p.softening_reference = require_number(ts, "theta_ref_K");
      p.heat_capacity = require_number(j, "c0_J_m3K");
      p.expansion = require_number(j, "alpha0_1K");
      p.conductivity = j.value("kappa0_W_mK", 0.0);
      p.reference_temperature = require_number(j, "theta0_K");
      return std::make_unique<Pa66Material>(p);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("material file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("material file: ") + e.what());
  }
  throw IoError("material file: unknown model '" + model + "'");
}

std::unique_ptr<GsmMaterial> material_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open material file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse material file " + path + ": " + e.what());
  }
  return material_from_json(j);
}

void write_material_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write material file: " + path);
  f << j.dump(2) << "\n";
}

}  // namespace dmn
