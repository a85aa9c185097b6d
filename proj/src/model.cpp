#include "dmn/model.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "dmn/errors.hpp"

namespace dmn {

using json = nlohmann::json;

void DmnModel::validate() const {
  const TreeTopology topo(depth);  // throws on out-of-range depth
  if (static_cast<int>(directions.size()) != topo.nodes())
    throw std::invalid_argument("model: expected one direction per tree node");
  if (static_cast<int>(weights.size()) != topo.leaves())
    throw std::invalid_argument("model: expected one weight per leaf");
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw std::invalid_argument("model: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw std::invalid_argument("model: leaf weights must sum to one");
}

std::vector<double> node_weights(const DmnModel& model) {
  const TreeTopology topo = model.topology();
  std::vector<double> w(topo.nodes());
  // Node indices run deepest level first, so children precede parents.
  for (int node = 0; node < topo.nodes(); ++node) {
    if (topo.children_are_leaves(node)) {
      w[node] = model.weights[topo.leaf_child(node, 0)] + model.weights[topo.leaf_child(node, 1)];
    } else {
      w[node] = w[topo.child(node, 0)] + w[topo.child(node, 1)];
    }
  }
  return w;
}

namespace {

// Child subtree weights of a node, reading leaves directly at the deepest level.
std::array<double, 2> child_weights(const TreeTopology& topo, const DmnModel& model,
                                    const std::vector<double>& node_w, int node) {
  if (topo.children_are_leaves(node))
    return {model.weights[topo.leaf_child(node, 0)], model.weights[topo.leaf_child(node, 1)]};
  return {node_w[topo.child(node, 0)], node_w[topo.child(node, 1)]};
}

}  // namespace

std::vector<double> volume_fractions(const DmnModel& model) {
  const TreeTopology topo = model.topology();
  const std::vector<double> node_w = node_weights(model);
  std::vector<double> c1(topo.nodes());
  for (int node = 0; node < topo.nodes(); ++node) {
    const auto cw = child_weights(topo, model, node_w, node);
    const double total = cw[0] + cw[1];
    c1[node] = total > 0 ? cw[0] / total : 0.5;
  }
  return c1;
}

std::vector<bool> active_nodes(const DmnModel& model, double threshold) {
  const TreeTopology topo = model.topology();
  const std::vector<double> node_w = node_weights(model);
  std::vector<bool> active(topo.nodes());
  for (int node = 0; node < topo.nodes(); ++node) {
    const auto cw = child_weights(topo, model, node_w, node);
    active[node] = cw[0] > threshold && cw[1] > threshold;
  }
  return active;
}

StiffnessMatrix homogenize_linear(const DmnModel& model, const StiffnessMatrix& c_first,
                                  const StiffnessMatrix& c_second) {
  model.validate();
  const TreeTopology topo = model.topology();
  const std::vector<double> node_w = node_weights(model);
  std::vector<StiffnessMatrix> stiff(topo.nodes(), c_first);
  for (int node = 0; node < topo.nodes(); ++node) {
    const bool deepest = topo.children_are_leaves(node);
    const StiffnessMatrix& left =
        deepest ? (TreeTopology::leaf_phase(topo.leaf_child(node, 0)) == 0 ? c_first : c_second)
                : stiff[topo.child(node, 0)];
    const StiffnessMatrix& right =
        deepest ? (TreeTopology::leaf_phase(topo.leaf_child(node, 1)) == 0 ? c_first : c_second)
                : stiff[topo.child(node, 1)];
    const auto cw = child_weights(topo, model, node_w, node);
    if (cw[0] + cw[1] <= kWeightPruneThreshold) continue;  // weightless: placeholder stays
    if (cw[0] <= kWeightPruneThreshold) {
      stiff[node] = right;  // degenerate laminate is exactly the surviving child
    } else if (cw[1] <= kWeightPruneThreshold) {
      stiff[node] = left;
    } else {
      stiff[node] = laminate_stiffness(left, right, cw[0] / (cw[0] + cw[1]),
                                       model.directions[node]);
    }
  }
  return stiff[topo.root()];
}

std::vector<SymTensor> apply_gradient(const DmnModel& model, const std::vector<Vec3>& jumps) {
  const TreeTopology topo = model.topology();
  if (static_cast<int>(jumps.size()) != topo.nodes())
    throw std::invalid_argument("apply_gradient: expected one jump per tree node");
  const std::vector<double> c1 = volume_fractions(model);
  std::vector<SymTensor> out(topo.leaves());
  for (int node = 0; node < topo.nodes(); ++node) {
    const SymTensor contribution = SymTensor::sym_dyad(jumps[node], model.directions[node].vec());
    const auto [begin, end] = topo.leaf_range(node);
    const int mid = begin + (end - begin) / 2;
    for (int leaf = begin; leaf < mid; ++leaf)
      out[leaf].mandel() += (1.0 - c1[node]) * contribution.mandel();
    for (int leaf = mid; leaf < end; ++leaf)
      out[leaf].mandel() -= c1[node] * contribution.mandel();
  }
  return out;
}

json model_to_json(const DmnModel& model) {
  model.validate();
  json dirs = json::array();
  for (const UnitVector3& n : model.directions) {
    const Vec3 v = n.canonical().vec();
    dirs.push_back({v[0], v[1], v[2]});
  }
  json j{{"format_version", 1},
         {"depth", model.depth},
         {"directions", dirs},
         {"weights", model.weights}};
  if (!model.training_config_sha256.empty())
    j["training_config_sha256"] = model.training_config_sha256;
  return j;
}

DmnModel model_from_json(const json& j) {
  if (!j.is_object()) throw IoError("model file: expected a JSON object");
  if (j.value("format_version", 0) != 1)
    throw IoError("model file: missing or unsupported format_version");
  DmnModel m;
  try {
    m.depth = j.at("depth").get<int>();
    if (m.depth < 1 || m.depth > 20) throw IoError("model file: depth out of range");
    const TreeTopology topo(m.depth);
    const json& dirs = j.at("directions");
    if (!dirs.is_array() || static_cast<int>(dirs.size()) != topo.nodes())
      throw IoError("model file: expected one direction per tree node");
    for (const json& d : dirs) {
      if (!d.is_array() || d.size() != 3) throw IoError("model file: directions must be 3-vectors");
      m.directions.push_back(
          UnitVector3(Vec3(d[0].get<double>(), d[1].get<double>(), d[2].get<double>()))
              .canonical());
    }
    m.weights = j.at("weights").get<std::vector<double>>();
    if (static_cast<int>(m.weights.size()) != topo.leaves())
      throw IoError("model file: expected one weight per leaf");
    double sum = 0;
    for (double w : m.weights) {
      if (!(w >= 0) || !std::isfinite(w)) throw IoError("model file: weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw IoError("model file: weights must sum to one");
    for (double& w : m.weights) w /= sum;  // exact partition of unity in memory
    m.training_config_sha256 = j.value("training_config_sha256", "");
  } catch (const json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
  m.validate();
  return m;
}

DmnModel model_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open model file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

void write_model_file(const DmnModel& model, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write model file: " + path);
  f << model_to_json(model).dump(2) << "\n";
}

}  // namespace dmn
