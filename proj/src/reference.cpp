#include "dmn/reference.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "dmn/errors.hpp"

namespace dmn {

namespace {

// Converged response of one cell (a leaf or a node's subtree) under its own
// average strain: averages plus consistent derivatives with respect to that
// strain and temperature.
struct CellResponse {
  Vec6 stress;
  Mat6 tangent_strain;
  Vec6 tangent_theta;
  double coupling = 0;
  Vec6 coupling_strain;
  double coupling_theta = 0;
  double dissipation = 0;
};

struct Recursion {
  const DmnModel& model;
  const TreeTopology& topo;
  const GsmMaterial& first;
  const GsmMaterial& second;
  const SolverSettings& settings;
  const std::vector<double>& fractions;
  const std::vector<bool>& active;
  const std::vector<Eigen::Matrix<double, 6, 3>>& s;
  const DmnState& prev;
  double theta;
  double dt;
  // Scratch, committed by the caller only on overall success.
  std::vector<Vec3>& jumps;
  std::vector<MaterialState>& new_states;
  std::vector<Vec6>& new_strains;
  int root_iterations = 0;
  double root_residual = 0;
};

CellResponse evaluate_cell(Recursion& c, int level, int idx, const Vec6& strain) {
  if (level == c.topo.depth() + 1) {
    const GsmMaterial& mat = TreeTopology::leaf_phase(idx) == 0 ? c.first : c.second;
    const GsmResponse r = mat.respond(SymTensor(strain), c.theta, c.dt,
                                      c.prev.leaf_strains[idx], c.prev.leaf_states[idx],
                                      c.new_states[idx]);
    c.new_strains[idx] = strain;
    CellResponse out;
    out.stress = r.stress.mandel();
    out.tangent_strain = r.dstress_dstrain;
    out.tangent_theta = r.dstress_dtheta.mandel();
    out.coupling = r.coupling;
    out.coupling_strain = r.dcoupling_dstrain.mandel();
    out.coupling_theta = r.dcoupling_dtheta;
    out.dissipation = r.dissipation;
    return out;
  }

  const int node = c.topo.node_at(level, idx);
  const double c1 = c.fractions[node], c2 = 1.0 - c1;
  const auto& s = c.s[node];
  Vec3 a = c.active[node] ? c.jumps[node] : Vec3::Zero();

  CellResponse r1, r2;
  Vec3 g;
  const auto eval_children = [&](const Vec3& a_trial) {
    const Vec6 shift = s * a_trial;
    r1 = evaluate_cell(c, level + 1, 2 * idx, strain + c2 * shift);
    r2 = evaluate_cell(c, level + 1, 2 * idx + 1, strain - c1 * shift);
    g = s.transpose() * (r1.stress - r2.stress);
  };
  const auto normalized = [&]() {
    const double scale = std::max((c1 * r1.stress + c2 * r2.stress).norm(), 1.0);
    const double r = g.norm() / scale;
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  };

  int iterations = 0;
  double res = 0;
  if (c.active[node]) {
    eval_children(a);
    res = normalized();
    std::vector<double> history{res};
    bool converged = res < c.settings.tolerance;
    for (int it = 1; it <= c.settings.max_iterations && !converged; ++it) {
      const Mat3 h = s.transpose() * (c2 * r1.tangent_strain + c1 * r2.tangent_strain) * s;
      Eigen::LLT<Mat3> llt(h);
      if (llt.info() != Eigen::Success)
        throw ConvergenceError("interface stiffness is not positive definite", it, history);
      Vec3 step = llt.solve(-g);
      const double g_old = g.norm();
      for (int bt = 0;; ++bt) {
        eval_children(a + step);
        if (g.norm() < g_old || bt >= c.settings.max_backtrack) {
          a += step;
          break;
        }
        step *= c.settings.shrink;
      }
      res = normalized();
      history.push_back(res);
      iterations = it;
      if (res < c.settings.tolerance) converged = true;
    }
    if (!converged)
      throw ConvergenceError("nested laminate interface did not converge", iterations, history);
    c.jumps[node] = a;
  } else {
    eval_children(Vec3::Zero());
  }
  if (level == 1) {
    c.root_iterations = std::max(iterations, 1);
    c.root_residual = res;
  }

  CellResponse out;
  out.stress = c1 * r1.stress + c2 * r2.stress;
  out.tangent_strain = c1 * r1.tangent_strain + c2 * r2.tangent_strain;
  out.tangent_theta = c1 * r1.tangent_theta + c2 * r2.tangent_theta;
  out.coupling = c1 * r1.coupling + c2 * r2.coupling;
  out.coupling_strain = c1 * r1.coupling_strain + c2 * r2.coupling_strain;
  out.coupling_theta = c1 * r1.coupling_theta + c2 * r2.coupling_theta;
  out.dissipation = c1 * r1.dissipation + c2 * r2.dissipation;
  if (c.active[node]) {
    // Implicit function theorem at the converged interface: the jump follows
    // the cell strain and temperature so that the traction balance stays
    // satisfied.
    const Mat3 h = s.transpose() * (c2 * r1.tangent_strain + c1 * r2.tangent_strain) * s;
    Eigen::LLT<Mat3> llt(h);
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("interface stiffness is not positive definite", iterations, {});
    const Mat6 dc = r1.tangent_strain - r2.tangent_strain;
    const Eigen::Matrix<double, 3, 6> da_de = llt.solve(Eigen::Matrix<double, 3, 6>(-s.transpose() * dc));
    const Vec3 da_dth = llt.solve(Vec3(-s.transpose() * (r1.tangent_theta - r2.tangent_theta)));
    const double c12 = c1 * c2;
    out.tangent_strain += c12 * dc * (s * da_de);
    out.tangent_theta += c12 * dc * (s * da_dth);
    const Vec6 d_diff = r1.coupling_strain - r2.coupling_strain;
    out.coupling_strain += c12 * (s * da_de).transpose() * d_diff;
    out.coupling_theta += c12 * d_diff.dot(s * da_dth);
  }
  return out;
}

}  // namespace

RecursiveLaminate::RecursiveLaminate(DmnModel model, const GsmMaterial& first_phase,
                                     const GsmMaterial& second_phase, SolverSettings settings)
    : model_(std::move(model)),
      first_(first_phase),
      second_(second_phase),
      settings_(settings),
      topo_(model_.depth),
      fractions_(volume_fractions(model_)),
      active_(active_nodes(model_)) {
  model_.validate();
  s_.reserve(topo_.nodes());
  for (int node = 0; node < topo_.nodes(); ++node)
    s_.push_back(sym_dyad_matrix(model_.directions[node].vec()));
}

DmnState RecursiveLaminate::initial_state() const {
  DmnState state;
  state.leaf_states.reserve(topo_.leaves());
  for (int leaf = 0; leaf < topo_.leaves(); ++leaf)
    state.leaf_states.push_back(
        (TreeTopology::leaf_phase(leaf) == 0 ? first_ : second_).initial_state());
  state.leaf_strains.resize(topo_.leaves());
  state.jumps.assign(topo_.nodes(), Vec3::Zero());
  return state;
}

double RecursiveLaminate::effective_heat_capacity() const {
  double c = 0;
  for (int leaf = 0; leaf < topo_.leaves(); ++leaf)
    c += model_.weights[leaf] *
         (TreeTopology::leaf_phase(leaf) == 0 ? first_ : second_).heat_capacity();
  return c;
}

DmnOutput RecursiveLaminate::evaluate(const SymTensor& strain, double theta, double dt,
                                      DmnState& state) const {
  if (!(dt > 0) || !(theta > 0)) throw std::invalid_argument("evaluate: need dt > 0, theta > 0");
  if (static_cast<int>(state.leaf_states.size()) != topo_.leaves() ||
      static_cast<int>(state.leaf_strains.size()) != topo_.leaves() ||
      static_cast<int>(state.jumps.size()) != topo_.nodes())
    throw std::invalid_argument("evaluate: state does not match the tree");

  std::vector<Vec3> jumps = state.jumps;
  std::vector<MaterialState> new_states(topo_.leaves());
  std::vector<Vec6> new_strains(topo_.leaves());
  Recursion rec{model_,  topo_,      first_,  second_,    settings_,  fractions_, active_,
                s_,      state,      theta,   dt,         jumps,      new_states, new_strains};
  const CellResponse root = evaluate_cell(rec, 1, 0, strain.mandel());

  DmnOutput out;
  out.stress = SymTensor(root.stress);
  out.coupling = root.coupling;
  out.dissipation = root.dissipation;
  out.tangent_strain = StiffnessMatrix(root.tangent_strain);
  out.tangent_theta = SymTensor(root.tangent_theta);
  out.coupling_strain = SymTensor(root.coupling_strain);
  out.coupling_theta = root.coupling_theta;
  out.iterations = rec.root_iterations;
  out.residual = rec.root_residual;

  state.leaf_states = std::move(new_states);
  for (int leaf = 0; leaf < topo_.leaves(); ++leaf)
    state.leaf_strains[leaf] = SymTensor(new_strains[leaf]);
  state.jumps = std::move(jumps);
  return out;
}

}  // namespace dmn
