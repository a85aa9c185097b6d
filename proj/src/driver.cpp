#include "dmn/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "dmn/errors.hpp"
#include "dmn/reference.hpp"

namespace dmn {

namespace {

constexpr double kPi = std::numbers::pi;
// 1 MPa/s equals 1e6 W/m^3; heat capacities arrive in J/(m^3 K).
constexpr double kWattPerMpa = 1e6;

void check_component(int component) {
  if (component < 0 || component >= 6)
    throw std::invalid_argument("load program: component index out of range");
}

double tensor_component(const SymTensor& t, int k) { return t.mandel()[k] / mandel_scale(k); }

}  // namespace

void LoadProgram::validate() const {
  if (!(theta0 > 0)) throw std::invalid_argument("load program: theta0 must be positive");
  if (thermal == ThermalMode::kConvection) {
    if (!(film_coefficient >= 0) || !(area_per_volume >= 0))
      throw std::invalid_argument("load program: convection constants must be nonnegative");
  }
  if (steps.empty()) throw std::invalid_argument("load program: no steps");
  for (const LoadStep& s : steps) {
    if (!(s.dt > 0)) throw std::invalid_argument("load program: dt must be positive");
    if (thermal == ThermalMode::kPrescribed && !(s.theta_target > 0))
      throw std::invalid_argument("load program: prescribed temperatures must be positive");
  }
}

LoadProgram monotonic_program(int component, double strain, double rate, int steps,
                              double theta0) {
  check_component(component);
  if (steps < 1) throw std::invalid_argument("load program: need at least one step");
  if (!(rate > 0)) throw std::invalid_argument("load program: rate must be positive");
  LoadProgram p;
  p.theta0 = theta0;
  const double duration = std::abs(strain) / rate;
  for (int n = 1; n <= steps; ++n) {
    LoadStep s;
    s.dt = duration / steps;
    s.control.fill(Control::kStress);
    s.control[static_cast<std::size_t>(component)] = Control::kStrain;
    Vec6 e = Vec6::Zero();
    e[component] = mandel_scale(component) * strain * n / steps;
    s.strain_target = SymTensor(e);
    p.steps.push_back(s);
  }
  return p;
}

LoadProgram cyclic_stress_program(int component, double amplitude, double frequency, int cycles,
                                  int steps_per_cycle, double theta0) {
  check_component(component);
  if (cycles < 1 || steps_per_cycle < 2)
    throw std::invalid_argument("load program: need at least one cycle of two steps");
  if (!(frequency > 0)) throw std::invalid_argument("load program: frequency must be positive");
  LoadProgram p;
  p.theta0 = theta0;
  const double period = 1.0 / frequency;
  const int total = cycles * steps_per_cycle;
  for (int n = 1; n <= total; ++n) {
    LoadStep s;
    s.dt = period / steps_per_cycle;
    s.control.fill(Control::kStress);
    Vec6 sig = Vec6::Zero();
    sig[component] =
        mandel_scale(component) * amplitude * std::sin(2.0 * kPi * n / steps_per_cycle);
    s.stress_target = SymTensor(sig);
    p.steps.push_back(s);
  }
  return p;
}

namespace {

// DmnEvaluator and RecursiveLaminate share the evaluate/initial_state shape.
template <typename Engine>
class EnginePoint final : public MaterialPointModel {
 public:
  template <typename... Args>
  explicit EnginePoint(Args&&... args)
      : engine_(std::forward<Args>(args)...), committed_(engine_.initial_state()) {}

  DmnOutput try_step(const SymTensor& strain, double theta, double dt) override {
    trial_ = committed_;
    DmnOutput out = engine_.evaluate(strain, theta, dt, trial_);
    pending_ = true;
    return out;
  }

  void commit_step() override {
    if (!pending_) throw std::logic_error("commit_step without a successful trial");
    committed_ = trial_;
    pending_ = false;
  }

  double heat_capacity() const override { return engine_.effective_heat_capacity(); }

 private:
  Engine engine_;
  DmnState committed_;
  DmnState trial_;
  bool pending_ = false;
};

class SinglePhasePoint final : public MaterialPointModel {
 public:
  explicit SinglePhasePoint(const GsmMaterial& material)
      : material_(material), committed_(material.initial_state()), trial_(committed_) {}

  DmnOutput try_step(const SymTensor& strain, double theta, double dt) override {
    trial_ = committed_;
    const GsmResponse r =
        material_.respond(strain, theta, dt, committed_strain_, committed_, trial_);
    DmnOutput out;
    out.stress = r.stress;
    out.coupling = r.coupling;
    out.dissipation = r.dissipation;
    out.tangent_strain = StiffnessMatrix(r.dstress_dstrain);
    out.tangent_theta = r.dstress_dtheta;
    out.coupling_strain = r.dcoupling_dstrain;
    out.coupling_theta = r.dcoupling_dtheta;
    out.iterations = 1;
    trial_strain_ = strain;
    pending_ = true;
    return out;
  }

  void commit_step() override {
    if (!pending_) throw std::logic_error("commit_step without a successful trial");
    committed_ = trial_;
    committed_strain_ = trial_strain_;
    pending_ = false;
  }

  double heat_capacity() const override { return material_.heat_capacity(); }

 private:
  const GsmMaterial& material_;
  MaterialState committed_;
  MaterialState trial_;
  SymTensor committed_strain_;
  SymTensor trial_strain_;
  bool pending_ = false;
};

}  // namespace

std::unique_ptr<MaterialPointModel> make_network_point(DmnModel model, const GsmMaterial& first,
                                                       const GsmMaterial& second,
                                                       SolverSettings settings) {
  return std::make_unique<EnginePoint<DmnEvaluator>>(std::move(model), first, second, settings);
}

std::unique_ptr<MaterialPointModel> make_laminate_point(DmnModel model, const GsmMaterial& first,
                                                        const GsmMaterial& second,
                                                        SolverSettings settings) {
  return std::make_unique<EnginePoint<RecursiveLaminate>>(std::move(model), first, second,
                                                          settings);
}

std::unique_ptr<MaterialPointModel> make_single_phase_point(const GsmMaterial& material) {
  return std::make_unique<SinglePhasePoint>(material);
}

namespace {

// End-of-window control values; interpolated when a window is bisected.
struct Targets {
  Vec6 strain = Vec6::Zero();  // Mandel coordinates, strain-controlled entries
  Vec6 stress = Vec6::Zero();  // Mandel coordinates, stress-controlled entries
  double theta = 0;            // prescribed mode
};

// Committed state at the left end of a window.
struct Anchor {
  Vec6 strain = Vec6::Zero();
  Vec6 stress = Vec6::Zero();
  double theta = 0;
};

// The accepted window: end state plus aggregated bookkeeping. heat is the
// committed energy input per volume (MPa) over the window and diss the
// integrated dissipation (MPa), both exact sums over the sub-steps taken.
struct Window {
  Vec6 strain = Vec6::Zero();
  Vec6 stress = Vec6::Zero();
  double theta = 0;
  double heat = 0;
  double diss = 0;
  int newton = 0;
  int bisections = 0;
};

Targets interpolated(const std::array<Control, 6>& control, const Anchor& a, const Targets& b,
                     double s) {
  Targets mid = b;
  for (int k = 0; k < 6; ++k) {
    if (control[static_cast<std::size_t>(k)] == Control::kStrain)
      mid.strain[k] = a.strain[k] + s * (b.strain[k] - a.strain[k]);
    else
      mid.stress[k] = a.stress[k] + s * (b.stress[k] - a.stress[k]);
  }
  mid.theta = a.theta + s * (b.theta - a.theta);
  return mid;
}

class ProgramRunner {
 public:
  ProgramRunner(MaterialPointModel& point, const LoadProgram& program,
                const RunSettings& settings)
      : point_(point),
        settings_(settings),
        thermal_(program.thermal),
        theta0_(program.theta0),
        c_eps_(point.heat_capacity() / kWattPerMpa),
        sink_(program.thermal == ThermalMode::kConvection
                  ? program.film_coefficient * program.area_per_volume / kWattPerMpa
                  : 0.0) {}

  Window advance(const std::array<Control, 6>& control, const Anchor& anchor,
                 const Targets& targets, double dt, int depth) {
    try {
      return solve_window(control, anchor, targets, dt);
    } catch (const ConvergenceError&) {
      if (depth >= settings_.max_bisections) throw;
      const Targets mid = interpolated(control, anchor, targets, 0.5);
      const Window left = advance(control, anchor, mid, 0.5 * dt, depth + 1);
      const Anchor handoff{left.strain, left.stress, left.theta};
      const Window right = advance(control, handoff, targets, 0.5 * dt, depth + 1);
      Window joined = right;
      joined.heat = left.heat + right.heat;
      joined.diss = left.diss + right.diss;
      joined.newton = left.newton + right.newton;
      joined.bisections = left.bisections + right.bisections + 1;
      return joined;
    }
  }

 private:
  // One implicit step under mixed control: Newton on the free strain
  // components and, outside prescribed mode, the temperature, with the four
  // algorithmic tangents forming the coupled system.
  Window solve_window(const std::array<Control, 6>& control, const Anchor& anchor,
                      const Targets& targets, double dt) {
    std::vector<int> free;  // stress-controlled components
    for (int k = 0; k < 6; ++k)
      if (control[static_cast<std::size_t>(k)] == Control::kStress) free.push_back(k);
    const int m = static_cast<int>(free.size());
    const bool solve_theta = thermal_ != ThermalMode::kPrescribed;
    const int dim = m + (solve_theta ? 1 : 0);

    Vec6 strain = anchor.strain;
    for (int k = 0; k < 6; ++k)
      if (control[static_cast<std::size_t>(k)] == Control::kStrain)
        strain[k] = targets.strain[k];
    double theta = solve_theta ? anchor.theta : targets.theta;

    std::vector<double> history;
    DmnOutput out;
    for (int iter = 0; iter <= settings_.max_newton; ++iter) {
      out = point_.try_step(SymTensor(strain), theta, dt);

      Eigen::VectorXd residual(dim);
      double worst = 0;
      bool converged = true;
      for (int i = 0; i < m; ++i) {
        const double target = targets.stress[free[static_cast<std::size_t>(i)]];
        const double r = out.stress.mandel()[free[static_cast<std::size_t>(i)]] - target;
        residual[i] = r;
        const double tol =
            settings_.control_tolerance * std::max(settings_.control_floor, std::abs(target));
        converged = converged && std::abs(r) <= tol;
        worst = std::max(worst, std::abs(r));
      }
      if (solve_theta) {
        const double r = c_eps_ * (theta - anchor.theta) - dt * out.coupling +
                         dt * sink_ * (theta - theta0_);
        residual[m] = r;
        const double tol =
            settings_.control_tolerance * c_eps_ * std::max(1.0, std::abs(theta - anchor.theta));
        converged = converged && std::abs(r) <= tol;
        worst = std::max(worst, std::abs(r));
      }
      history.push_back(worst);
      if (converged) {
        Window w;
        if (solve_theta) {
          // Restate the committed temperature from the discrete balance with
          // the converged sources, so the energy bookkeeping telescopes
          // exactly; the shift is below the temperature residual tolerance.
          theta = anchor.theta + dt * (out.coupling - sink_ * (theta - theta0_)) / c_eps_;
        }
        point_.commit_step();
        w.strain = strain;
        w.stress = out.stress.mandel();
        w.theta = theta;
        w.heat = dt * out.coupling;
        w.diss = dt * out.dissipation;
        w.newton = static_cast<int>(history.size());
        return w;
      }
      if (iter == settings_.max_newton) break;

      Eigen::MatrixXd jac(dim, dim);
      const Mat6& c = out.tangent_strain.mandel();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          jac(i, j) = c(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
      if (solve_theta) {
        for (int i = 0; i < m; ++i)
          jac(i, m) = out.tangent_theta.mandel()[free[static_cast<std::size_t>(i)]];
        for (int j = 0; j < m; ++j)
          jac(m, j) = -dt * out.coupling_strain.mandel()[free[static_cast<std::size_t>(j)]];
        jac(m, m) = c_eps_ - dt * out.coupling_theta + dt * sink_;
      }
      const Eigen::VectorXd delta = jac.partialPivLu().solve(residual);
      if (!delta.allFinite())
        throw ConvergenceError("control iteration produced a non-finite update",
                               static_cast<int>(history.size()), history);
      for (int i = 0; i < m; ++i) strain[free[static_cast<std::size_t>(i)]] -= delta[i];
      if (solve_theta) {
        theta -= delta[m];
        if (!(theta > 0))
          throw ConvergenceError("control iteration left the physical temperature range",
                                 static_cast<int>(history.size()), history);
      }
    }
    throw ConvergenceError("stress control did not converge",
                           static_cast<int>(history.size()), history);
  }

  MaterialPointModel& point_;
  RunSettings settings_;
  ThermalMode thermal_;
  double theta0_;
  double c_eps_;
  double sink_;
};

}  // namespace

Trajectory run_program(MaterialPointModel& point, const LoadProgram& program,
                       const RunSettings& settings) {
  program.validate();
  if (!(point.heat_capacity() > 0))
    throw std::invalid_argument("run_program: heat capacity must be positive");

  Trajectory out;
  out.theta0 = program.theta0;

  // The initial record: zero strain, the stress the pristine state carries
  // there, no sources. The probe trial is discarded without a commit.
  TrajectoryStep first;
  first.time = 0;
  first.theta = program.theta0;
  first.stress = point.try_step(SymTensor(), program.theta0, program.steps.front().dt).stress;
  out.steps.push_back(first);

  ProgramRunner runner(point, program, settings);
  Anchor anchor;
  anchor.stress = first.stress.mandel();
  anchor.theta = program.theta0;
  double time = 0;

  for (std::size_t n = 0; n < program.steps.size(); ++n) {
    const LoadStep& step = program.steps[n];
    Targets targets;
    targets.strain = step.strain_target.mandel();
    targets.stress = step.stress_target.mandel();
    targets.theta = program.thermal == ThermalMode::kPrescribed ? step.theta_target
                                                                : program.theta0;
    Window w;
    try {
      w = runner.advance(step.control, anchor, targets, step.dt, 0);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("step " + std::to_string(n + 1) + " of " +
                                 std::to_string(program.steps.size()) + ": " + e.what(),
                             e.iterations, e.residual_history);
    }
    time += step.dt;
    TrajectoryStep rec;
    rec.time = time;
    rec.strain = SymTensor(w.strain);
    rec.stress = SymTensor(w.stress);
    rec.theta = w.theta;
    rec.coupling = w.heat / step.dt;
    rec.dissipation = w.diss / step.dt;
    rec.newton_iterations = w.newton;
    rec.bisections = w.bisections;
    out.steps.push_back(rec);
    anchor = Anchor{w.strain, w.stress, w.theta};
  }
  return out;
}

std::vector<CycleRecord> cyclic_metrics(const Trajectory& trajectory, double period,
                                        int component, AmplitudeMetric metric) {
  check_component(component);
  if (!(period > 0)) throw std::invalid_argument("cyclic metrics: period must be positive");
  if (trajectory.steps.size() < 2)
    throw std::invalid_argument("cyclic metrics: trajectory has no steps");
  const double t_end = trajectory.steps.back().time;
  const double tol = 1e-9 * period;
  const int cycles = static_cast<int>(std::floor((t_end + tol) / period));
  if (cycles < 1)
    throw std::invalid_argument("cyclic metrics: trajectory spans less than one cycle");
  if (t_end - cycles * period > tol)
    std::fprintf(stderr, "cyclic metrics: dropping a partial trailing cycle\n");

  std::vector<CycleRecord> records;
  std::size_t begin = 0;
  for (int n = 0; n < cycles; ++n) {
    const double a = n * period;
    const double b = (n + 1) * period;
    while (begin + 1 < trajectory.steps.size() && trajectory.steps[begin + 1].time <= a + tol)
      ++begin;
    std::size_t end = begin;
    while (end + 1 < trajectory.steps.size() && trajectory.steps[end + 1].time <= b + tol)
      ++end;
    if (end == begin || trajectory.steps[end].time < b - tol)
      throw std::invalid_argument("cyclic metrics: step grid does not cover a whole cycle");

    CycleRecord rec;
    rec.index = n + 1;
    double lo = 0, hi = 0;
    bool seeded = false;
    double rise = 0, energy = 0;
    for (std::size_t i = begin; i <= end; ++i) {
      const TrajectoryStep& s = trajectory.steps[i];
      double low, high;
      if (metric == AmplitudeMetric::kComponent) {
        low = high = tensor_component(s.strain, component);
      } else {
        const Vec3 eig = s.strain.eigenvalues3();
        low = eig[0];
        high = eig[2];
      }
      if (!seeded) {
        lo = low;
        hi = high;
        seeded = true;
      } else {
        lo = std::min(lo, low);
        hi = std::max(hi, high);
      }
      if (i > begin) {
        const TrajectoryStep& p = trajectory.steps[i - 1];
        const double h = s.time - p.time;
        rise += 0.5 * h * ((p.theta - trajectory.theta0) + (s.theta - trajectory.theta0));
        energy += 0.5 * h * (p.dissipation + s.dissipation);
      }
    }
    rec.strain_amplitude = 0.5 * (hi - lo);
    rec.temperature_rise = rise / period;
    rec.dissipated_energy = energy;
    records.push_back(rec);
    begin = end;
  }
  return records;
}

namespace {

ErrorMetric reduce_error(const std::vector<double>& times, const std::vector<double>& candidate,
                         const std::vector<double>& reference) {
  ErrorMetric metric;
  double normalizer = 0;
  for (const double r : reference) normalizer = std::max(normalizer, std::abs(r));
  if (normalizer == 0) {
    metric.valid = false;
    return metric;
  }
  const double span = times.back() - times.front();
  double integral = 0;
  double previous = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double eta = std::abs(candidate[i] - reference[i]) / normalizer;
    metric.max = std::max(metric.max, eta);
    if (i > 0) integral += 0.5 * (times[i] - times[i - 1]) * (previous + eta);
    previous = eta;
  }
  metric.mean = span > 0 ? integral / span : metric.max;
  return metric;
}

}  // namespace

TrajectoryErrors error_metrics(const Trajectory& candidate, const Trajectory& reference) {
  const std::size_t n = reference.steps.size();
  if (candidate.steps.size() != n || n < 2)
    throw std::invalid_argument("error metrics: trajectories must share a time grid");
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = reference.steps[i].time;
    if (std::abs(candidate.steps[i].time - times[i]) >
        1e-9 * std::max(1.0, std::abs(times[i])))
      throw std::invalid_argument("error metrics: trajectories must share a time grid");
  }

  TrajectoryErrors out;
  std::vector<double> a(n), b(n);
  for (int k = 0; k < 6; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = candidate.steps[i].stress.mandel()[k];
      b[i] = reference.steps[i].stress.mandel()[k];
    }
    out.stress[static_cast<std::size_t>(k)] = reduce_error(times, a, b);
  }
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = candidate.steps[i].theta - candidate.theta0;
    b[i] = reference.steps[i].theta - reference.theta0;
  }
  out.theta_change = reduce_error(times, a, b);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = candidate.steps[i].coupling;
    b[i] = reference.steps[i].coupling;
  }
  out.coupling = reduce_error(times, a, b);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = candidate.steps[i].dissipation;
    b[i] = reference.steps[i].dissipation;
  }
  out.dissipation = reduce_error(times, a, b);
  return out;
}

namespace {

using nlohmann::json;

const char* mode_name(ThermalMode mode) {
  switch (mode) {
    case ThermalMode::kAdiabatic:
      return "adiabatic";
    case ThermalMode::kPrescribed:
      return "prescribed";
    case ThermalMode::kConvection:
      return "convection";
  }
  return "adiabatic";
}

int component_from_name(const std::string& name) {
  static const std::array<std::string, 6> names = {"11", "22", "33", "12", "13", "23"};
  for (int k = 0; k < 6; ++k)
    if (names[static_cast<std::size_t>(k)] == name) return k;
  throw IoError("load program: unknown component '" + name + "'");
}

SymTensor tensor_from_array(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 6)
    throw IoError(std::string("load program: ") + what + " must hold six tensor components");
  return SymTensor::from_components(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                                    j[3].get<double>(), j[4].get<double>(), j[5].get<double>());
}

}  // namespace

nlohmann::json to_json(const LoadProgram& program) {
  json steps = json::array();
  for (const LoadStep& s : program.steps) {
    std::string control(6, 's');
    for (int k = 0; k < 6; ++k)
      if (s.control[static_cast<std::size_t>(k)] == Control::kStrain)
        control[static_cast<std::size_t>(k)] = 'e';
    json strain = json::array(), stress = json::array();
    for (int k = 0; k < 6; ++k) {
      strain.push_back(tensor_component(s.strain_target, k));
      stress.push_back(tensor_component(s.stress_target, k));
    }
    json row{{"dt_s", s.dt}, {"control", control}, {"strain", strain}, {"stress", stress}};
    if (program.thermal == ThermalMode::kPrescribed) row["theta_K"] = s.theta_target;
    steps.push_back(row);
  }
  json thermal{{"mode", mode_name(program.thermal)}};
  if (program.thermal == ThermalMode::kConvection) {
    thermal["film_W_m2K"] = program.film_coefficient;
    thermal["area_per_volume_1_m"] = program.area_per_volume;
  }
  return json{{"format_version", 1},
              {"theta0_K", program.theta0},
              {"thermal", thermal},
              {"program", json{{"type", "explicit"}, {"steps", steps}}}};
}

LoadProgram program_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw IoError("load program: expected a JSON object");
    if (j.value("format_version", 0) != 1)
      throw IoError("load program: missing or unsupported format_version");
    LoadProgram p;
    p.theta0 = j.value("theta0_K", 293.15);
    if (j.contains("thermal")) {
      const json& t = j.at("thermal");
      const std::string mode = t.value("mode", "adiabatic");
      if (mode == "adiabatic") {
        p.thermal = ThermalMode::kAdiabatic;
      } else if (mode == "prescribed") {
        p.thermal = ThermalMode::kPrescribed;
      } else if (mode == "convection") {
        p.thermal = ThermalMode::kConvection;
        p.film_coefficient = t.at("film_W_m2K").get<double>();
        p.area_per_volume = t.at("area_per_volume_1_m").get<double>();
      } else {
        throw IoError("load program: unknown thermal mode '" + mode + "'");
      }
    }
    const json& prog = j.at("program");
    const std::string type = prog.at("type").get<std::string>();
    if (type == "monotonic") {
      const LoadProgram built = monotonic_program(
          component_from_name(prog.at("component").get<std::string>()),
          prog.at("strain").get<double>(), prog.at("rate_1_s").get<double>(),
          prog.value("steps", 40), p.theta0);
      p.steps = built.steps;
    } else if (type == "cyclic_stress") {
      const LoadProgram built = cyclic_stress_program(
          component_from_name(prog.at("component").get<std::string>()),
          prog.at("amplitude_MPa").get<double>(), prog.at("frequency_Hz").get<double>(),
          prog.at("cycles").get<int>(), prog.value("steps_per_cycle", 20), p.theta0);
      p.steps = built.steps;
    } else if (type == "explicit") {
      for (const json& row : prog.at("steps")) {
        LoadStep s;
        s.dt = row.at("dt_s").get<double>();
        const std::string control = row.at("control").get<std::string>();
        if (control.size() != 6)
          throw IoError("load program: control must name six components");
        for (int k = 0; k < 6; ++k) {
          const char c = control[static_cast<std::size_t>(k)];
          if (c == 'e')
            s.control[static_cast<std::size_t>(k)] = Control::kStrain;
          else if (c == 's')
            s.control[static_cast<std::size_t>(k)] = Control::kStress;
          else
            throw IoError("load program: control characters must be 'e' or 's'");
        }
        if (row.contains("strain")) s.strain_target = tensor_from_array(row.at("strain"), "strain");
        if (row.contains("stress")) s.stress_target = tensor_from_array(row.at("stress"), "stress");
        s.theta_target = row.value("theta_K", p.theta0);
        p.steps.push_back(s);
      }
    } else {
      throw IoError("load program: unknown program type '" + type + "'");
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("load program: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("load program: ") + e.what());
  }
}

LoadProgram program_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open load program file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse load program file " + path + ": " + e.what());
  }
  return program_from_json(j);
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  out.precision(17);
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out = open_csv(path);
  out << "t_s,eps_11,eps_22,eps_33,eps_12,eps_13,eps_23,"
         "sig_11_MPa,sig_22_MPa,sig_33_MPa,sig_12_MPa,sig_13_MPa,sig_23_MPa,"
         "theta_K,coupling_MPa_s,dissipation_MPa_s,newton_iterations,bisections\n";
  for (const TrajectoryStep& s : trajectory.steps) {
    out << s.time;
    for (int k = 0; k < 6; ++k) out << ',' << tensor_component(s.strain, k);
    for (int k = 0; k < 6; ++k) out << ',' << tensor_component(s.stress, k);
    out << ',' << s.theta << ',' << s.coupling << ',' << s.dissipation << ','
        << s.newton_iterations << ',' << s.bisections << '\n';
  }
  if (!out) throw IoError("failed writing trajectory file: " + path);
}

void write_cycles_csv(const std::string& path, const std::vector<CycleRecord>& records) {
  std::ofstream out = open_csv(path);
  out << "cycle,strain_amplitude,temperature_rise_K,dissipated_energy_MPa\n";
  for (const CycleRecord& r : records) {
    out << r.index << ',' << r.strain_amplitude << ',' << r.temperature_rise << ','
        << r.dissipated_energy << '\n';
  }
  if (!out) throw IoError("failed writing cycle file: " + path);
}

}  // namespace dmn
