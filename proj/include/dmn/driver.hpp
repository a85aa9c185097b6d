#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dmn/materials.hpp"
#include "dmn/solver.hpp"

namespace dmn {

// Exactly one control applies to each strain/stress component of a step.
enum class Control : std::uint8_t { kStrain, kStress };

enum class ThermalMode : std::uint8_t { kAdiabatic, kPrescribed, kConvection };

// One implicit time step of a load program. Targets are end-of-step values;
// each component follows either its strain or its stress target.
struct LoadStep {
  double dt = 0;                     // s
  std::array<Control, 6> control{};  // Mandel component order 11,22,33,12,13,23
  SymTensor strain_target;
  SymTensor stress_target;   // MPa
  double theta_target = 0;   // K, read only in prescribed mode
};

struct LoadProgram {
  double theta0 = 293.15;  // K; initial temperature, and the ambient one
  ThermalMode thermal = ThermalMode::kAdiabatic;
  double film_coefficient = 0;  // W / (m^2 K), convection mode
  double area_per_volume = 0;   // 1 / m, convection mode
  std::vector<LoadStep> steps;

  // Throws std::invalid_argument on nonpositive dt, temperatures, or missing
  // convection constants.
  void validate() const;
};

// Strain-controlled ramp of one component at the given rate up to `strain`,
// in `steps` equal increments; the other five components are stress-free.
// Off-diagonal components state the tensor value, not the scaled coordinate.
LoadProgram monotonic_program(int component, double strain, double rate, int steps, double theta0);

// Fully stress-controlled sinusoid amplitude*sin(2 pi frequency t) on one
// component, zero elsewhere, sampled steps_per_cycle times per cycle.
LoadProgram cyclic_stress_program(int component, double amplitude, double frequency, int cycles,
                                  int steps_per_cycle, double theta0);

// One accepted step of a run. coupling and dissipation are the effective
// source values of the window ending at `time`: the implicit end-of-step
// values, aggregated to window averages when the step was bisected
// internally, so that sum(dt * coupling) = c_eps * (theta - theta0) holds
// exactly in adiabatic runs.
struct TrajectoryStep {
  double time = 0;  // s
  SymTensor strain;
  SymTensor stress;        // MPa
  double theta = 0;        // K
  double coupling = 0;     // MPa / s
  double dissipation = 0;  // MPa / s
  int newton_iterations = 0;
  int bisections = 0;
};

struct Trajectory {
  double theta0 = 0;
  std::vector<TrajectoryStep> steps;  // steps.front() is the initial state
};

// How cycle strain amplitudes are reduced: one tracked component, or half the
// spread between the extreme eigenvalues seen over the cycle.
enum class AmplitudeMetric : std::uint8_t { kComponent, kEigenvalue };

struct CycleRecord {
  int index = 0;                  // 1-based cycle number
  double strain_amplitude = 0;    // half of (max - min) over the cycle
  double temperature_rise = 0;    // K; cycle mean of theta - theta0
  double dissipated_energy = 0;   // MPa; integral of the dissipation rate
};

// Splits the trajectory into whole periods and reduces each: amplitudes by
// extremes over the cycle's records, integrals by the trapezoidal rule on
// the step grid. A partial trailing cycle is dropped with a warning on
// stderr. Throws std::invalid_argument when not even one cycle fits.
std::vector<CycleRecord> cyclic_metrics(const Trajectory& trajectory, double period,
                                        int component = 0,
                                        AmplitudeMetric metric = AmplitudeMetric::kComponent);

// Pointwise relative deviation normalized by the reference's largest
// magnitude over time, reduced to the time mean and maximum. When the
// reference vanishes identically the quantity carries no information and
// valid is false.
struct ErrorMetric {
  double mean = 0;
  double max = 0;
  bool valid = true;
};

struct TrajectoryErrors {
  std::array<ErrorMetric, 6> stress;  // per Mandel component
  ErrorMetric theta_change;           // of theta - theta0
  ErrorMetric coupling;
  ErrorMetric dissipation;
};

// Requires identical time grids; throws std::invalid_argument otherwise.
TrajectoryErrors error_metrics(const Trajectory& candidate, const Trajectory& reference);

// A material point under test: repeated trial steps from one committed state,
// with an explicit commit once the outer control loop accepts the step.
class MaterialPointModel {
 public:
  virtual ~MaterialPointModel() = default;

  // Implicit step from the committed state; does not advance it. Throws
  // ConvergenceError when the underlying solve fails.
  virtual DmnOutput try_step(const SymTensor& strain, double theta, double dt) = 0;

  // Adopts the most recent successful trial as the committed state.
  virtual void commit_step() = 0;

  virtual double heat_capacity() const = 0;  // J / (m^3 K)
};

// The network evaluator, the nested-laminate reference, and a single
// homogeneous phase behind the same stepping interface. The phase materials
// must outlive the returned model.
std::unique_ptr<MaterialPointModel> make_network_point(DmnModel model, const GsmMaterial& first,
                                                       const GsmMaterial& second,
                                                       SolverSettings settings = {});
std::unique_ptr<MaterialPointModel> make_laminate_point(DmnModel model, const GsmMaterial& first,
                                                        const GsmMaterial& second,
                                                        SolverSettings settings = {});
std::unique_ptr<MaterialPointModel> make_single_phase_point(const GsmMaterial& material);

struct RunSettings {
  // Prescribed stress components are matched to within
  // control_tolerance * max(control_floor, |target|) at every accepted step.
  double control_tolerance = 1e-9;
  double control_floor = 1.0;  // MPa
  int max_newton = 30;
  int max_bisections = 4;  // per failing step, halving dt each time
};

// Runs the program step by step: a coupled Newton iteration drives the free
// strain components and, outside prescribed mode, the temperature, using the
// four algorithmic tangents in one system. Adiabatic commits obey
// c_eps (theta_new - theta_old) = dt * coupling exactly; convection adds the
// -h (A/V) (theta - theta0) sink. Failed steps are bisected and re-aggregated
// onto the original grid. Throws ConvergenceError when a step keeps failing.
Trajectory run_program(MaterialPointModel& point, const LoadProgram& program,
                       const RunSettings& settings = {});

// JSON schema (README): explicit step lists or the two named generators.
LoadProgram program_from_json(const nlohmann::json& j);
LoadProgram program_from_file(const std::string& path);
nlohmann::json to_json(const LoadProgram& program);

// CSV emission, one row per record; see README for the columns.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);
void write_cycles_csv(const std::string& path, const std::vector<CycleRecord>& records);

}  // namespace dmn
