#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "dmn/laminate.hpp"
#include "dmn/tensor.hpp"
#include "dmn/topology.hpp"

namespace dmn {

// Subtrees whose total weight falls below this carry no material and are
// skipped during propagation and jump solves.
inline constexpr double kWeightPruneThreshold = 1e-12;

// Parameters of a deep material network: one lamination direction per tree
// node (indexed as in TreeTopology, deepest level first) and one nonnegative
// input weight per leaf. Weights sum to one; even leaves take the first
// phase, odd leaves the second.
struct DmnModel {
  int depth = 1;
  std::vector<UnitVector3> directions;  // 2^depth - 1
  std::vector<double> weights;          // 2^depth, sum 1
  std::string training_config_sha256;   // provenance tag, may be empty

  TreeTopology topology() const { return TreeTopology(depth); }

  // Throws std::invalid_argument on inconsistent sizes, negative weights, or
  // a weight sum away from one by more than 1e-10.
  void validate() const;
};

// Subtree weight per node (pairwise sums of the leaf weights, bottom up).
std::vector<double> node_weights(const DmnModel& model);

// First-phase-side volume fraction c1 per node: the first child subtree's
// share of the node weight; 1/2 where the node weight vanishes.
std::vector<double> volume_fractions(const DmnModel& model);

// Nodes whose child subtrees both carry weight above the threshold. Only
// these support an interface jump; the rest are degenerate laminates.
std::vector<bool> active_nodes(const DmnModel& model,
                               double threshold = kWeightPruneThreshold);

// Effective linear stiffness by bottom-up laminate propagation. Nodes with a
// weightless child pass the other child's stiffness through unchanged.
StiffnessMatrix homogenize_linear(const DmnModel& model, const StiffnessMatrix& c_first,
                                  const StiffnessMatrix& c_second);

// Applies the gradient operator: per-leaf strain perturbations induced by one
// interface jump per node. Each node adds +c2 sym(a x n) to the leaves of its
// first child subtree and -c1 sym(a x n) to those of its second, so the
// weighted average over leaves vanishes identically.
std::vector<SymTensor> apply_gradient(const DmnModel& model, const std::vector<Vec3>& jumps);

// JSON model files: format_version, depth, directions (sign-canonical),
// weights, optional training_config_sha256.
nlohmann::json model_to_json(const DmnModel& model);
DmnModel model_from_json(const nlohmann::json& j);
DmnModel model_from_file(const std::string& path);
void write_model_file(const DmnModel& model, const std::string& path);

}  // namespace dmn
