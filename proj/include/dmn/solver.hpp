#pragma once

#include <vector>

#include "dmn/materials.hpp"
#include "dmn/model.hpp"

namespace dmn {

struct SolverSettings {
  double tolerance = 1e-12;  // on the normalized force residual
  int max_iterations = 50;
  int max_backtrack = 8;
  double shrink = 0.5;  // backtracking step reduction factor
};

// Mutable per-material-point data: internal variables and strains of every
// leaf at the last committed step, plus the interface jumps as a warm start.
struct DmnState {
  std::vector<MaterialState> leaf_states;
  std::vector<SymTensor> leaf_strains;
  std::vector<Vec3> jumps;
};

// Converged effective response of one implicit time step.
struct DmnOutput {
  SymTensor stress;              // MPa
  double coupling = 0;           // MPa / s
  double dissipation = 0;        // MPa / s, nonnegative
  StiffnessMatrix tangent_strain;  // d(stress)/d(strain)
  SymTensor tangent_theta;         // d(stress)/d(theta), MPa / K
  SymTensor coupling_strain;       // d(coupling)/d(strain), MPa / s
  double coupling_theta = 0;       // d(coupling)/d(theta), MPa / (s K)
  int iterations = 0;
  double residual = 0;
};

// Online evaluation of a trained network: Newton iteration on the interface
// equilibrium, effective averages, and the four algorithmic tangents. The
// linear systems are solved by a block Cholesky factorization that follows
// the tree's ancestor structure exactly, so no fill-in occurs.
//
// The evaluator holds references to the phase materials; both must outlive
// it. One instance may evaluate many states concurrently: evaluate() only
// mutates the state passed to it.
class DmnEvaluator {
 public:
  DmnEvaluator(DmnModel model, const GsmMaterial& first_phase, const GsmMaterial& second_phase,
               SolverSettings settings = {});

  // Zero jumps, zero strains, pristine internal variables.
  DmnState initial_state() const;

  // One implicit step to the given total strain and temperature. On success
  // the state is advanced; on ConvergenceError it is left untouched so the
  // caller can cut the time step and retry.
  DmnOutput evaluate(const SymTensor& strain, double theta, double dt, DmnState& state) const;

  // Weighted average of the phase heat capacities, J / (m^3 K).
  double effective_heat_capacity() const;

  const DmnModel& model() const { return model_; }
  const SolverSettings& settings() const { return settings_; }

 private:
  struct NodeInfo {
    Eigen::Matrix<double, 6, 3> s;       // sym-dyad matrix of the direction
    double c1 = 0.5;                     // first-child volume fraction
    bool active = false;                 // both child subtrees carry weight
    int compact = -1;                    // index among active nodes, -1 otherwise
    std::vector<int> path;               // compact indices of active ancestors, nearest first
    std::vector<double> path_coefficient;  // signed jump coefficient of each ancestor
  };

  const GsmMaterial& leaf_material(int leaf) const {
    return TreeTopology::leaf_phase(leaf) == 0 ? first_ : second_;
  }

  DmnModel model_;
  const GsmMaterial& first_;
  const GsmMaterial& second_;
  SolverSettings settings_;
  TreeTopology topo_;
  std::vector<NodeInfo> nodes_;
  std::vector<int> active_list_;  // node ids of the active nodes, ascending
};

}  // namespace dmn
