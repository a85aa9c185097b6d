#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dmn/tensor.hpp"

namespace dmn {

// Internal variables of one material point. Thermoelastic points carry no
// internal variables; the inelastic model uses all three fields.
struct MaterialState {
  double plastic_strain = 0;               // accumulated equivalent plastic strain
  SymTensor viscoplastic_strain;           // deviatoric by construction
  std::vector<SymTensor> viscous_strains;  // one per Maxwell branch
};

// Result of one implicit-Euler step of the incremental potential at fixed
// previous state: stress, the thermomechanical coupling source, dissipation,
// and consistent derivatives with respect to strain and temperature.
struct GsmResponse {
  SymTensor stress;                        // MPa
  Mat6 dstress_dstrain = Mat6::Zero();     // MPa
  SymTensor dstress_dtheta;                // MPa / K
  double coupling = 0;                     // D, MPa / s == MW / m^3
  SymTensor dcoupling_dstrain;             // MPa / s per unit strain
  double dcoupling_dtheta = 0;             // MPa / (s K)
  double dissipation = 0;                  // MPa / s, nonnegative
};

class GsmMaterial {
 public:
  virtual ~GsmMaterial() = default;

  // Stress only; cheapest path, used inside line searches.
  virtual SymTensor stress(const SymTensor& strain, double theta, double dt,
                           const MaterialState& state) const = 0;

  // Stress plus the consistent tangent d(stress)/d(strain).
  virtual void stress_tangent(const SymTensor& strain, double theta, double dt,
                              const MaterialState& state, SymTensor& stress_out,
                              Mat6& tangent_out) const = 0;

  // Full response including temperature sensitivities and the updated state.
  // strain_prev is the strain at the start of the step; the coupling terms
  // contain the discrete strain rate (strain - strain_prev) / dt.
  // state_out must not alias state.
  virtual GsmResponse respond(const SymTensor& strain, double theta, double dt,
                              const SymTensor& strain_prev, const MaterialState& state,
                              MaterialState& state_out) const = 0;

  virtual MaterialState initial_state() const = 0;
  virtual double heat_capacity() const = 0;  // J / (m^3 K)
  virtual StiffnessMatrix elastic_stiffness() const = 0;
  virtual std::string name() const = 0;
};

struct ThermoelasticParameters {
  double youngs_modulus = 0;         // MPa
  double poisson_ratio = 0;
  double heat_capacity = 0;          // J / (m^3 K)
  double expansion = 0;              // 1 / K
  double conductivity = 0;           // W / (m K); carried through, unused pointwise
  double reference_temperature = 0;  // K, strain-free temperature

  void validate() const;
};

struct MaxwellBranch {
  double modulus = 0;  // MPa
  double tau = 0;      // s
};

struct Pa66Parameters {
  double long_term_modulus = 0;  // MPa
  double poisson_ratio = 0;      // shared by the equilibrium and Maxwell elements
  std::vector<MaxwellBranch> branches;

  double wlf_c1 = 0;  // -
  double wlf_c2 = 0;  // K

  double yield_stress = 0;        // MPa, at the softening reference temperature
  double hardening_modulus = 0;   // MPa
  double hardening_exponent = 0;  // -
  double viscosity = 0;           // MPa s, at the softening reference temperature
  double rate_exponent = 0;       // -

  double softening_yield = 0;      // 1 / K, scales yield stress and hardening
  double softening_viscosity = 0;  // 1 / K, scales the viscosity
  double softening_reference = 0;  // K

  double heat_capacity = 0;          // J / (m^3 K)
  double expansion = 0;              // 1 / K
  double conductivity = 0;           // W / (m K); carried through, unused pointwise
  double reference_temperature = 0;  // K, strain-free temperature

  void validate() const;
};

// log10 shift = -c1 (theta - ref) / (c2 + theta - ref)
double wlf_shift(double c1, double c2, double theta_ref, double theta);

// exp(-beta (theta - ref))
double temperature_degradation(double beta, double theta_ref, double theta);

class ThermoelasticMaterial final : public GsmMaterial {
 public:
  explicit ThermoelasticMaterial(const ThermoelasticParameters& p);

  SymTensor stress(const SymTensor& strain, double theta, double dt,
                   const MaterialState& state) const override;
  void stress_tangent(const SymTensor& strain, double theta, double dt,
                      const MaterialState& state, SymTensor& stress_out,
                      Mat6& tangent_out) const override;
  GsmResponse respond(const SymTensor& strain, double theta, double dt,
                      const SymTensor& strain_prev, const MaterialState& state,
                      MaterialState& state_out) const override;

  MaterialState initial_state() const override { return {}; }
  double heat_capacity() const override { return p_.heat_capacity; }
  StiffnessMatrix elastic_stiffness() const override { return stiffness_; }
  std::string name() const override { return "thermoelastic"; }

  const ThermoelasticParameters& parameters() const { return p_; }

 private:
  ThermoelasticParameters p_;
  StiffnessMatrix stiffness_;
  SymTensor stress_theta_;  // -C[alpha], constant
};

class Pa66Material final : public GsmMaterial {
 public:
  explicit Pa66Material(const Pa66Parameters& p);

  SymTensor stress(const SymTensor& strain, double theta, double dt,
                   const MaterialState& state) const override;
  void stress_tangent(const SymTensor& strain, double theta, double dt,
                      const MaterialState& state, SymTensor& stress_out,
                      Mat6& tangent_out) const override;
  GsmResponse respond(const SymTensor& strain, double theta, double dt,
                      const SymTensor& strain_prev, const MaterialState& state,
                      MaterialState& state_out) const override;

  MaterialState initial_state() const override;
  double heat_capacity() const override { return p_.heat_capacity; }
  StiffnessMatrix elastic_stiffness() const override;
  std::string name() const override { return "pa66_viscoplastic"; }

  const Pa66Parameters& parameters() const { return p_; }

 private:
  Pa66Parameters p_;
  // Derived per-branch constants.
  double bulk_inf_ = 0, shear_inf_ = 0;
  std::vector<double> bulk_i_, shear_i_, tau_bulk_, tau_shear_;
};

// Built-in data sets used throughout the tests and tools.
ThermoelasticParameters glass_parameters();
Pa66Parameters pa66_parameters();

// JSON (de)serialization; see README for the schema.
nlohmann::json to_json(const ThermoelasticParameters& p);
nlohmann::json to_json(const Pa66Parameters& p);
std::unique_ptr<GsmMaterial> material_from_json(const nlohmann::json& j);
std::unique_ptr<GsmMaterial> material_from_file(const std::string& path);
void write_material_file(const std::string& path, const nlohmann::json& j);

}  // namespace dmn
