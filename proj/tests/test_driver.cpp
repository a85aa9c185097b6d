#include "dmn/driver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmn/errors.hpp"
#include "dmn/materials.hpp"
#include "dmn/model.hpp"

namespace dmn {
namespace {

constexpr double kTheta0 = 293.15;

// Random directions, weights bounded away from zero so no node prunes.
DmnModel random_model(int depth, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> uni(0.05, 1.0);
  DmnModel model;
  model.depth = depth;
  const TreeTopology topo(depth);
  for (int node = 0; node < topo.nodes(); ++node)
    model.directions.push_back(UnitVector3(Vec3(gauss(rng), gauss(rng), gauss(rng))));
  double sum = 0;
  for (int leaf = 0; leaf < topo.leaves(); ++leaf) {
    model.weights.push_back(uni(rng));
    sum += model.weights.back();
  }
  for (double& w : model.weights) w /= sum;
  return model;
}

LoadStep hold_step(double dt, const SymTensor& strain) {
  LoadStep s;
  s.dt = dt;
  s.control.fill(Control::kStrain);
  s.strain_target = strain;
  s.theta_target = kTheta0;
  return s;
}

// Elastic phase that refuses strain increments above a threshold, standing in
// for a solver that only converges on small enough steps.
class BrittleStepMaterial final : public GsmMaterial {
 public:
  BrittleStepMaterial(const ThermoelasticParameters& p, double max_increment)
      : inner_(p), max_increment_(max_increment) {}

  SymTensor stress(const SymTensor& strain, double theta, double dt,
                   const MaterialState& state) const override {
    return inner_.stress(strain, theta, dt, state);
  }
  void stress_tangent(const SymTensor& strain, double theta, double dt,
                      const MaterialState& state, SymTensor& stress_out,
                      Mat6& tangent_out) const override {
    inner_.stress_tangent(strain, theta, dt, state, stress_out, tangent_out);
  }
  GsmResponse respond(const SymTensor& strain, double theta, double dt,
                      const SymTensor& strain_prev, const MaterialState& state,
                      MaterialState& state_out) const override {
    if ((strain.mandel() - strain_prev.mandel()).norm() > max_increment_)
      throw ConvergenceError("strain increment too large", 1, {1.0});
    return inner_.respond(strain, theta, dt, strain_prev, state, state_out);
  }

  MaterialState initial_state() const override { return inner_.initial_state(); }
  double heat_capacity() const override { return inner_.heat_capacity(); }
  StiffnessMatrix elastic_stiffness() const override { return inner_.elastic_stiffness(); }
  std::string name() const override { return "brittle_step"; }

 private:
  ThermoelasticMaterial inner_;
  double max_increment_;
};

TEST(DriverTest, FullyPrescribedZeroStrainStaysQuiet) {
  const Pa66Material matrix(pa66_parameters());
  const auto point = make_single_phase_point(matrix);
  LoadProgram program;
  program.theta0 = kTheta0;
  for (int n = 0; n < 3; ++n) program.steps.push_back(hold_step(0.1, SymTensor::zero()));
  const Trajectory traj = run_program(*point, program);

  ASSERT_EQ(traj.steps.size(), 4u);
  EXPECT_EQ(traj.steps.front().time, 0.0);
  for (const TrajectoryStep& s : traj.steps) {
    EXPECT_EQ(s.strain.mandel().norm(), 0.0);
    EXPECT_LT(s.stress.mandel().norm(), 1e-12);
    EXPECT_NEAR(s.theta, kTheta0, 1e-12);
    EXPECT_NEAR(s.coupling, 0.0, 1e-12);
    EXPECT_NEAR(s.dissipation, 0.0, 1e-12);
    EXPECT_EQ(s.bisections, 0);
  }
}

TEST(DriverTest, UniaxialStressFreeLateralMatchesPoissonContraction) {
  const ThermoelasticParameters p = glass_parameters();
  const ThermoelasticMaterial glass(p);
  const auto point = make_single_phase_point(glass);
  LoadProgram program = monotonic_program(0, 1e-3, 1e-3, 5, kTheta0);
  program.thermal = ThermalMode::kPrescribed;
  for (LoadStep& s : program.steps) s.theta_target = p.reference_temperature;
  const Trajectory traj = run_program(*point, program);

  ASSERT_EQ(traj.steps.size(), 6u);
  for (std::size_t n = 1; n < traj.steps.size(); ++n) {
    const TrajectoryStep& s = traj.steps[n];
    const double axial = 1e-3 * static_cast<double>(n) / 5.0;
    EXPECT_NEAR(s.strain(0, 0), axial, 1e-15);
    EXPECT_NEAR(s.strain(1, 1), -p.poisson_ratio * axial, 1e-12);
    EXPECT_NEAR(s.strain(2, 2), -p.poisson_ratio * axial, 1e-12);
    EXPECT_NEAR(s.stress(0, 0), p.youngs_modulus * axial, 1e-6);
    for (int k = 1; k < 6; ++k) EXPECT_NEAR(s.stress.mandel()[k], 0.0, 1e-9);
    EXPECT_EQ(s.theta, p.reference_temperature);
  }
}

TEST(DriverTest, AdiabaticVolumeChangeCoolsOnExpansionHeatsOnCompression) {
  const ThermoelasticMaterial glass(glass_parameters());
  const double c_eps = glass.heat_capacity() * 1e-6;  // MPa / K
  for (const double sign : {1.0, -1.0}) {
    const auto point = make_single_phase_point(glass);
    LoadProgram program;
    program.theta0 = kTheta0;
    for (int n = 1; n <= 4; ++n) {
      const double tr = sign * 3e-3 * n / 4.0;
      program.steps.push_back(hold_step(0.25, SymTensor::spherical(tr)));
    }
    const Trajectory traj = run_program(*point, program);

    // Elastic volume expansion cools the point, compression heats it, and the
    // committed temperatures integrate the recorded sources exactly.
    double heat = 0;
    for (std::size_t n = 1; n < traj.steps.size(); ++n) {
      const double prev = traj.steps[n - 1].theta;
      const double next = traj.steps[n].theta;
      EXPECT_LT(sign * (next - prev), 0.0);
      EXPECT_NEAR(c_eps * (next - prev), 0.25 * traj.steps[n].coupling,
                  1e-13 * c_eps * std::abs(next - prev));
      EXPECT_EQ(traj.steps[n].dissipation, 0.0);
      heat += 0.25 * traj.steps[n].coupling;
    }
    EXPECT_NEAR(c_eps * (traj.steps.back().theta - kTheta0), heat, 1e-12 * std::abs(heat));
  }
}

TEST(DriverTest, EnergyBookkeepingTelescopesThroughPlasticCycles) {
  const Pa66Material matrix(pa66_parameters());
  const auto point = make_single_phase_point(matrix);
  const double c_eps = matrix.heat_capacity() * 1e-6;
  const double amplitude = 30.0;  // MPa, well past the yield stress
  const LoadProgram program = cyclic_stress_program(0, amplitude, 1.0, 2, 16, kTheta0);
  const Trajectory traj = run_program(*point, program);

  ASSERT_EQ(traj.steps.size(), 33u);
  double heat = 0;
  for (std::size_t n = 1; n < traj.steps.size(); ++n) {
    const TrajectoryStep& s = traj.steps[n];
    const double dt = s.time - traj.steps[n - 1].time;
    const double target =
        amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(n) / 16.0);
    EXPECT_NEAR(s.stress(0, 0), target, 1e-9 * std::max(1.0, std::abs(target)));
    for (int k = 1; k < 6; ++k)
      EXPECT_NEAR(s.stress.mandel()[k], 0.0, 1e-9);
    EXPECT_GE(s.dissipation, -1e-12);
    // The committed temperature restates the discrete heat balance, so the
    // identity holds per step even when a window was bisected internally.
    EXPECT_NEAR(c_eps * (s.theta - traj.steps[n - 1].theta), dt * s.coupling,
                1e-12 * c_eps * std::max(1e-3, std::abs(s.theta - traj.steps[n - 1].theta)));
    heat += dt * s.coupling;
  }
  EXPECT_NEAR(c_eps * (traj.steps.back().theta - kTheta0), heat, 1e-12 * std::abs(heat));
  // Plastic work dominates the closed cycles: the point ends warmer.
  EXPECT_GT(traj.steps.back().theta, kTheta0 + 1e-3);
}

TEST(DriverTest, TimeRefinementConvergesAtFirstOrder) {
  const ThermoelasticMaterial glass(glass_parameters());
  const double duration = 1.0, tr_final = 9e-3;
  const auto run = [&](int steps) {
    const auto point = make_single_phase_point(glass);
    LoadProgram program;
    program.theta0 = kTheta0;
    for (int n = 1; n <= steps; ++n)
      program.steps.push_back(hold_step(duration / steps, SymTensor::spherical(tr_final * n / steps)));
    return run_program(*point, program).steps.back().theta;
  };
  const double coarse = run(8), medium = run(16), fine = run(32);
  const double order = std::log2((coarse - medium) / (medium - fine));
  EXPECT_GT(order, 0.9);
  EXPECT_LT(order, 1.1);
}

TEST(DriverTest, NetworkAndRecursiveLaminateAgreeOnMixedProgram) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  const DmnModel model = random_model(3, 61);

  LoadProgram program;
  program.theta0 = kTheta0;
  for (int n = 1; n <= 6; ++n) {
    LoadStep s;
    s.dt = 0.05;
    s.control.fill(Control::kStress);
    s.control[0] = Control::kStrain;
    Vec6 strain = Vec6::Zero(), stress = Vec6::Zero();
    strain[0] = 4e-3 * n / 6.0;
    stress[3] = mandel_scale(3) * 10.0 * n / 6.0;
    s.strain_target = SymTensor(strain);
    s.stress_target = SymTensor(stress);
    program.steps.push_back(s);
  }

  const auto network = make_network_point(model, glass, matrix);
  const auto laminate = make_laminate_point(model, glass, matrix);
  const Trajectory a = run_program(*network, program);
  const Trajectory b = run_program(*laminate, program);

  const TrajectoryErrors err = error_metrics(a, b);
  for (int k = 0; k < 6; ++k)
    if (err.stress[static_cast<std::size_t>(k)].valid)
      EXPECT_LT(err.stress[static_cast<std::size_t>(k)].max, 1e-8) << "component " << k;
  EXPECT_TRUE(err.theta_change.valid);
  EXPECT_LT(err.theta_change.max, 1e-8);
  EXPECT_LT(err.coupling.max, 1e-8);
  EXPECT_LT(err.dissipation.max, 1e-8);
}

TEST(DriverTest, CyclicMetricsRecoverASampledSinusoid) {
  const double period = 1.0, eps0 = 4e-3, diss = 3.0;
  const int per_cycle = 21;
  Trajectory traj;
  traj.theta0 = kTheta0;
  for (int k = 0; k <= 52; ++k) {  // two whole cycles plus a partial tail
    TrajectoryStep s;
    s.time = period * k / per_cycle;
    Vec6 e = Vec6::Zero();
    e[3] = mandel_scale(3) * eps0 * std::sin(2.0 * std::numbers::pi * s.time / period);
    s.strain = SymTensor(e);
    s.theta = kTheta0 + 2.0 * s.time;
    s.dissipation = diss;
    traj.steps.push_back(s);
  }

  const auto records = cyclic_metrics(traj, period, 3);
  ASSERT_EQ(records.size(), 2u);
  for (const CycleRecord& r : records) {
    // 21 samples per cycle miss the crest by at most 1 - cos(pi/21).
    EXPECT_LE(r.strain_amplitude, eps0 * (1 + 1e-12));
    EXPECT_GE(r.strain_amplitude, eps0 * (1 - 0.013));
    EXPECT_NEAR(r.dissipated_energy, diss * period, 1e-12);
  }
  EXPECT_EQ(records[0].index, 1);
  EXPECT_EQ(records[1].index, 2);
  // The trapezoidal mean of the linear temperature history is exact.
  EXPECT_NEAR(records[0].temperature_rise, 1.0, 1e-12);
  EXPECT_NEAR(records[1].temperature_rise, 3.0, 1e-12);

  // A pure shear cycle has eigenvalues +-gamma: both metrics agree here.
  const auto eig = cyclic_metrics(traj, period, 3, AmplitudeMetric::kEigenvalue);
  EXPECT_NEAR(eig[0].strain_amplitude, records[0].strain_amplitude, 1e-12);

  EXPECT_THROW(cyclic_metrics(traj, 10.0), std::invalid_argument);
}

TEST(DriverTest, ErrorMetricsNormalizeByThePeakReference) {
  Trajectory ref, cand;
  ref.theta0 = 300.0;
  cand.theta0 = 400.0;
  for (int k = 0; k <= 3; ++k) {
    TrajectoryStep r, c;
    r.time = c.time = k;
    Vec6 sig = Vec6::Zero();
    sig[0] = k;  // peak magnitude 3
    r.stress = SymTensor(sig);
    sig[0] = k + 0.5;
    c.stress = SymTensor(sig);
    r.theta = ref.theta0 + 0.7 * k;
    c.theta = cand.theta0 + 0.7 * k;  // identical change, shifted base
    r.coupling = k;
    c.coupling = 2.0 * k;
    ref.steps.push_back(r);
    cand.steps.push_back(c);
  }
  const TrajectoryErrors err = error_metrics(cand, ref);
  EXPECT_NEAR(err.stress[0].mean, 0.5 / 3.0, 1e-12);
  EXPECT_NEAR(err.stress[0].max, 0.5 / 3.0, 1e-12);
  EXPECT_FALSE(err.stress[1].valid);  // reference identically zero
  EXPECT_TRUE(err.theta_change.valid);
  EXPECT_NEAR(err.theta_change.max, 0.0, 1e-12);
  EXPECT_NEAR(err.coupling.max, 1.0, 1e-12);  // eta(t) = t / 3
  EXPECT_NEAR(err.coupling.mean, 0.5, 1e-12);
  EXPECT_FALSE(err.dissipation.valid);

  Trajectory shifted = ref;
  shifted.steps[2].time += 0.5;
  EXPECT_THROW(error_metrics(shifted, ref), std::invalid_argument);
  shifted.steps.pop_back();
  EXPECT_THROW(error_metrics(shifted, ref), std::invalid_argument);
}

TEST(DriverTest, ConvectionRelaxesTheTemperatureTowardAmbient) {
  const ThermoelasticMaterial glass(glass_parameters());
  const auto point = make_single_phase_point(glass);
  LoadProgram program;
  program.theta0 = kTheta0;
  program.thermal = ThermalMode::kConvection;
  program.film_coefficient = 50.0;   // W / (m^2 K)
  program.area_per_volume = 100.0;   // 1 / m
  const SymTensor squeeze = SymTensor::spherical(-4e-3);
  program.steps.push_back(hold_step(0.1, squeeze));
  const double dt_hold = 0.5;
  for (int n = 0; n < 6; ++n) program.steps.push_back(hold_step(dt_hold, squeeze));
  const Trajectory traj = run_program(*point, program);

  EXPECT_GT(traj.steps[1].theta, kTheta0);  // compression heats first
  // At constant strain the source vanishes, leaving the linear sink: each
  // hold step contracts theta - theta0 by exactly c / (c + dt h A/V).
  const double c_eps = glass.heat_capacity() * 1e-6;
  const double sink = program.film_coefficient * program.area_per_volume * 1e-6;
  const double contraction = c_eps / (c_eps + dt_hold * sink);
  for (std::size_t n = 2; n < traj.steps.size(); ++n) {
    const double prev = traj.steps[n - 1].theta - kTheta0;
    const double next = traj.steps[n].theta - kTheta0;
    EXPECT_NEAR(next, contraction * prev, 1e-12 * std::abs(prev));
    EXPECT_LT(std::abs(next), std::abs(prev));
  }
}

TEST(DriverTest, BisectionSplitsAHardStepAndReaggregates) {
  const ThermoelasticParameters p = glass_parameters();
  const double threshold = 1e-3;
  const BrittleStepMaterial brittle(p, threshold);
  const ThermoelasticMaterial plain(p);

  LoadProgram program;
  program.theta0 = kTheta0;
  program.thermal = ThermalMode::kPrescribed;
  Vec6 e = Vec6::Zero();
  e[0] = 3.9 * threshold;
  program.steps.push_back(hold_step(1.0, SymTensor(e)));

  const auto hard = make_single_phase_point(brittle);
  const Trajectory a = run_program(*hard, program);
  const auto easy = make_single_phase_point(plain);
  const Trajectory b = run_program(*easy, program);

  // Two levels of halving yield four quarter windows folded into one record.
  ASSERT_EQ(a.steps.size(), 2u);
  EXPECT_EQ(a.steps[1].bisections, 3);
  EXPECT_EQ(b.steps[1].bisections, 0);
  EXPECT_NEAR(a.steps[1].time, 1.0, 1e-15);
  const TrajectoryErrors err = error_metrics(a, b);
  EXPECT_LT(err.stress[0].max, 1e-12);
  EXPECT_LT(err.coupling.max, 1e-12);  // window average equals the flat rate

  // Past the reach of four halvings the driver reports the failure.
  LoadProgram far = program;
  far.steps[0].strain_target = SymTensor(Vec6(50.0 * threshold * Vec6::Unit(0)));
  const auto stuck = make_single_phase_point(brittle);
  EXPECT_THROW(run_program(*stuck, far), ConvergenceError);
}

TEST(DriverTest, PrescribedTemperatureDrivesFreeThermalExpansion) {
  const ThermoelasticParameters p = glass_parameters();
  const ThermoelasticMaterial glass(p);
  const auto point = make_single_phase_point(glass);
  LoadProgram program;
  program.theta0 = p.reference_temperature;
  program.thermal = ThermalMode::kPrescribed;
  for (int n = 1; n <= 5; ++n) {
    LoadStep s;
    s.dt = 0.2;
    s.control.fill(Control::kStress);
    s.theta_target = p.reference_temperature + 4.0 * n;
    program.steps.push_back(s);
  }
  const Trajectory traj = run_program(*point, program);

  for (std::size_t n = 1; n < traj.steps.size(); ++n) {
    const TrajectoryStep& s = traj.steps[n];
    EXPECT_EQ(s.theta, p.reference_temperature + 4.0 * static_cast<double>(n));
    const double thermal = p.expansion * (s.theta - p.reference_temperature);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.strain.mandel()[k], thermal, 1e-12);
    for (int k = 3; k < 6; ++k) EXPECT_NEAR(s.strain.mandel()[k], 0.0, 1e-12);
    EXPECT_LT(s.stress.mandel().norm(), 1e-8);
  }
}

TEST(DriverTest, ProgramJsonRoundTripsThroughTheExplicitForm) {
  LoadProgram original = cyclic_stress_program(3, 25.0, 2.0, 2, 8, 296.0);
  original.thermal = ThermalMode::kConvection;
  original.film_coefficient = 12.0;
  original.area_per_volume = 400.0;

  const LoadProgram back = program_from_json(to_json(original));
  EXPECT_EQ(back.thermal, ThermalMode::kConvection);
  EXPECT_EQ(back.film_coefficient, 12.0);
  EXPECT_EQ(back.area_per_volume, 400.0);
  EXPECT_EQ(back.theta0, 296.0);
  ASSERT_EQ(back.steps.size(), original.steps.size());
  for (std::size_t n = 0; n < back.steps.size(); ++n) {
    EXPECT_NEAR(back.steps[n].dt, original.steps[n].dt, 1e-15);
    EXPECT_EQ(back.steps[n].control, original.steps[n].control);
    EXPECT_LT((back.steps[n].stress_target.mandel() - original.steps[n].stress_target.mandel())
                  .norm(),
              1e-12);
  }

  const nlohmann::json named{{"format_version", 1},
                             {"theta0_K", 300.0},
                             {"program",
                              {{"type", "monotonic"},
                               {"component", "12"},
                               {"strain", 0.02},
                               {"rate_1_s", 1e-3},
                               {"steps", 10}}}};
  const LoadProgram built = program_from_json(named);
  const LoadProgram direct = monotonic_program(3, 0.02, 1e-3, 10, 300.0);
  ASSERT_EQ(built.steps.size(), direct.steps.size());
  EXPECT_EQ(built.steps[4].control, direct.steps[4].control);
  EXPECT_LT(
      (built.steps[9].strain_target.mandel() - direct.steps[9].strain_target.mandel()).norm(),
      1e-15);

  nlohmann::json bad = to_json(original);
  bad["program"]["steps"][0]["control"] = "eeessx";
  EXPECT_THROW(program_from_json(bad), IoError);
  bad = to_json(original);
  bad["program"]["steps"][1]["dt_s"] = -1.0;
  EXPECT_THROW(program_from_json(bad), IoError);
  bad = to_json(original);
  bad.erase("format_version");
  EXPECT_THROW(program_from_json(bad), IoError);
  bad = nlohmann::json{{"format_version", 1},
                       {"program", {{"type", "monotonic"}, {"component", "14"}}}};
  EXPECT_THROW(program_from_json(bad), IoError);
}

TEST(DriverTest, CsvWritersEmitOneRowPerRecord) {
  const ThermoelasticMaterial glass(glass_parameters());
  const auto point = make_single_phase_point(glass);
  const Trajectory traj = run_program(*point, monotonic_program(0, 1e-3, 1e-2, 3, kTheta0));
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "dmn_driver_csv_test";
  std::filesystem::create_directories(dir);

  const std::string traj_path = (dir / "trajectory.csv").string();
  write_trajectory_csv(traj_path, traj);
  std::ifstream in(traj_path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), traj.steps.size() + 1);
  EXPECT_EQ(lines[0].substr(0, 10), "t_s,eps_11");
  double t = -1;
  std::stringstream(lines[2]) >> t;
  EXPECT_NEAR(t, traj.steps[1].time, 1e-15);

  const std::string cyc_path = (dir / "cycles.csv").string();
  write_cycles_csv(cyc_path, {CycleRecord{1, 2e-3, 0.5, 7.0}});
  std::ifstream cyc(cyc_path);
  lines.clear();
  while (std::getline(cyc, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1].substr(0, 2), "1,");

  EXPECT_THROW(write_trajectory_csv((dir / "no_dir" / "x.csv").string(), traj), IoError);
  std::filesystem::remove_all(dir);
}

TEST(DriverTest, ProgramValidationRejectsIllFormedInput) {
  LoadProgram empty;
  EXPECT_THROW(empty.validate(), std::invalid_argument);
  LoadProgram bad = monotonic_program(0, 1e-3, 1e-2, 3, kTheta0);
  bad.steps[1].dt = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = monotonic_program(0, 1e-3, 1e-2, 3, -5.0);
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(monotonic_program(6, 1e-3, 1e-2, 3, kTheta0), std::invalid_argument);
  EXPECT_THROW(cyclic_stress_program(0, 10.0, 0.0, 2, 8, kTheta0), std::invalid_argument);
}

}  // namespace
}  // namespace dmn
