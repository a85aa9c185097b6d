#pragma once

#include "dmn/model.hpp"
#include "dmn/solver.hpp"

namespace dmn {

// Exact nested-laminate closure of the same binary tree: every node runs its
// own Newton iteration on the interface traction balance with both children
// converged first, and the tangents chain through the implicit function
// theorem level by level. The network evaluator solves all interfaces
// simultaneously; both must agree at their tolerances, which makes this the
// independent reference for validation runs. Cost grows with tree depth, so
// it is meant for shallow trees.
class RecursiveLaminate {
 public:
  // The phase materials must outlive the instance.
  RecursiveLaminate(DmnModel model, const GsmMaterial& first_phase,
                    const GsmMaterial& second_phase, SolverSettings settings = {});

  DmnState initial_state() const;

  // Same contract as the network evaluator: commits into state only on
  // success, throws ConvergenceError with the root residual history otherwise.
  DmnOutput evaluate(const SymTensor& strain, double theta, double dt, DmnState& state) const;

  double effective_heat_capacity() const;

  const DmnModel& model() const { return model_; }

 private:
  DmnModel model_;
  const GsmMaterial& first_;
  const GsmMaterial& second_;
  SolverSettings settings_;
  TreeTopology topo_;
  std::vector<double> fractions_;
  std::vector<bool> active_;
  std::vector<Eigen::Matrix<double, 6, 3>> s_;
};

}  // namespace dmn
