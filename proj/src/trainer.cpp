#include "dmn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dmn/errors.hpp"
#include "dmn/laminate.hpp"
#include "dmn/topology.hpp"

namespace dmn {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

void check_sizes(const TrainingParameters& params, const TreeTopology& topo) {
  if (static_cast<int>(params.directions.size()) != topo.nodes() ||
      static_cast<int>(params.weights.size()) != topo.leaves())
    throw std::invalid_argument("training parameters do not match the tree");
}

// Everything the reverse pass needs, captured during one forward evaluation.
struct Chain {
  std::vector<LaminateWorkspace> workspaces;
  std::vector<double> fractions;
  std::vector<double> weight_left, weight_right;
  std::vector<Vec3> unit_normals;
  std::vector<double> direction_norms;
};

StiffnessMatrix forward_chain(const TrainingParameters& params, const StiffnessMatrix& c_first,
                              const StiffnessMatrix& c_second, Chain* chain) {
  const TreeTopology topo(params.depth);
  check_sizes(params, topo);
  const int nodes = topo.nodes();
  if (chain) {
    chain->workspaces.resize(nodes);
    chain->fractions.resize(nodes);
    chain->weight_left.resize(nodes);
    chain->weight_right.resize(nodes);
    chain->unit_normals.resize(nodes);
    chain->direction_norms.resize(nodes);
  }
  std::vector<double> node_weight(nodes);
  std::vector<StiffnessMatrix> stiffness(nodes);
  for (int node = 0; node < nodes; ++node) {
    double w_left, w_right;
    const StiffnessMatrix *in_first, *in_second;
    if (topo.children_are_leaves(node)) {
      w_left = std::max(params.weights[topo.leaf_child(node, 0)], 0.0);
      w_right = std::max(params.weights[topo.leaf_child(node, 1)], 0.0);
      in_first = &c_first;
      in_second = &c_second;
    } else {
      w_left = node_weight[topo.child(node, 0)];
      w_right = node_weight[topo.child(node, 1)];
      in_first = &stiffness[topo.child(node, 0)];
      in_second = &stiffness[topo.child(node, 1)];
    }
    const double total = w_left + w_right;
    node_weight[node] = total;
    const double fraction = total > 0 ? w_left / total : 0.5;
    const UnitVector3 normal(params.directions[node]);
    stiffness[node] = laminate_stiffness(*in_first, *in_second, fraction, normal,
                                         chain ? &chain->workspaces[node] : nullptr);
    if (chain) {
      chain->fractions[node] = fraction;
      chain->weight_left[node] = w_left;
      chain->weight_right[node] = w_right;
      chain->unit_normals[node] = normal.vec();
      chain->direction_norms[node] = params.directions[node].norm();
    }
  }
  return stiffness[topo.root()];
}

// d||M||_p / dM at entry value x, scaled by ||M||_p^(1-p); subgradient 0 when
// the norm vanishes.
Mat6 entrywise_norm_gradient(const Mat6& m, double p, double norm) {
  Mat6 g = Mat6::Zero();
  if (!(norm > 0)) return g;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      const double x = m(a, b);
      if (x == 0) continue;
      g(a, b) = (x > 0 ? 1.0 : -1.0) * std::pow(std::abs(x), p - 1.0) /
                std::pow(norm, p - 1.0);
    }
  return g;
}

double clamped_weight_sum(const TrainingParameters& params) {
  double s = 0;
  for (double v : params.weights) s += std::max(v, 0.0);
  return s;
}

}  // namespace

void TrainingConfig::validate() const {
  if (depth < 1 || depth > 20) throw std::invalid_argument("training config: depth out of range");
  if (batch_size < 1) throw std::invalid_argument("training config: batch size must be >= 1");
  if (norm_exponent < 1 || stack_exponent < 1)
    throw std::invalid_argument("training config: norm exponents must be >= 1");
  if (weight_penalty < 0) throw std::invalid_argument("training config: negative penalty");
  if (!(rate_max >= rate_min) || rate_min < 0)
    throw std::invalid_argument("training config: invalid learning rates");
  if (modulation_period < 1) throw std::invalid_argument("training config: period must be >= 1");
  if (!(decay > 0) || decay > 1) throw std::invalid_argument("training config: decay not in (0, 1]");
  if (epochs < 1) throw std::invalid_argument("training config: epochs must be >= 1");
  if (!(split > 0) || !(split < 1))
    throw std::invalid_argument("training config: split not in (0, 1)");
}

DmnModel TrainingParameters::to_model() const {
  const TreeTopology topo(depth);
  check_sizes(*this, topo);
  DmnModel model;
  model.depth = depth;
  model.directions.reserve(topo.nodes());
  for (const Vec3& u : directions) model.directions.push_back(UnitVector3(u));
  double sum = 0;
  for (double v : weights) sum += std::max(v, 0.0);
  if (!(sum > 0)) throw std::invalid_argument("all weights vanished");
  model.weights.reserve(topo.leaves());
  for (double v : weights) model.weights.push_back(std::max(v, 0.0) / sum);
  model.validate();
  return model;
}

std::pair<StiffnessMatrix, StiffnessMatrix> sample_stiffness_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_modulus(std::log(100.0), std::log(1e5));
  std::uniform_real_distribution<double> reduction(0.0, 0.995);
  std::normal_distribution<double> gauss;
  const double k1 = std::exp(log_modulus(rng)), g1 = std::exp(log_modulus(rng));
  const double k2 = std::exp(log_modulus(rng)), g2 = std::exp(log_modulus(rng));
  const double a = reduction(rng);
  Vec6 dir;
  double norm = 0;
  do {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = gauss(rng);
    dir = SymTensor::from_matrix(m).dev().mandel();
    norm = dir.norm();
  } while (norm < 1e-8);
  dir /= norm;
  const StiffnessMatrix first = isotropic_stiffness(k1, g1);
  StiffnessMatrix second = isotropic_stiffness(k2, g2);
  second.mandel() -= 2.0 * g2 * a * (dir * dir.transpose());
  return {first, second};
}

double material_contrast(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second) {
  const Vec6 e1 = eig_sym(c_first.mandel());
  const Vec6 e2 = eig_sym(c_second.mandel());
  if (!(e1[0] > 0) || !(e2[0] > 0))
    throw std::invalid_argument("material_contrast: stiffness not positive definite");
  return std::max(e1[5] / e2[0], e2[5] / e1[0]);
}

TrainingParameters random_parameters(int depth, std::mt19937_64& rng) {
  const TreeTopology topo(depth);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  TrainingParameters params;
  params.depth = depth;
  params.directions.reserve(topo.nodes());
  for (int node = 0; node < topo.nodes(); ++node) {
    Vec3 u;
    do {
      u = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (u.norm() < 1e-8);
    params.directions.push_back(u.normalized());
  }
  params.weights.reserve(topo.leaves());
  double sum = 0;
  for (int leaf = 0; leaf < topo.leaves(); ++leaf) {
    params.weights.push_back(uni(rng));
    sum += params.weights.back();
  }
  for (double& w : params.weights) w /= sum;
  return params;
}

StiffnessMatrix network_stiffness(const TrainingParameters& params,
                                  const StiffnessMatrix& c_first,
                                  const StiffnessMatrix& c_second) {
  return forward_chain(params, c_first, c_second, nullptr);
}

double training_loss(const TrainingParameters& params, const std::vector<StiffnessSample>& batch,
                     const TrainingConfig& config) {
  if (batch.empty()) throw std::invalid_argument("training loss: empty batch");
  const double p = config.norm_exponent, q = config.stack_exponent;
  double sum_rq = 0;
  for (const StiffnessSample& s : batch) {
    const StiffnessMatrix fit = network_stiffness(params, s.c_first, s.c_second);
    const double num = (s.c_reference - fit).norm_entrywise(p);
    const double den = s.c_reference.norm_entrywise(p);
    sum_rq += std::pow(num / den, q);
  }
  const double misfit = std::pow(sum_rq, 1.0 / q) / static_cast<double>(batch.size());
  const double excess = clamped_weight_sum(params) - 1.0;
  return misfit + config.weight_penalty * excess * excess;
}

TrainingGradient training_loss_gradient(const TrainingParameters& params,
                                        const std::vector<StiffnessSample>& batch,
                                        const TrainingConfig& config) {
  if (batch.empty()) throw std::invalid_argument("training loss: empty batch");
  const TreeTopology topo(params.depth);
  check_sizes(params, topo);
  const int nodes = topo.nodes();
  const double p = config.norm_exponent, q = config.stack_exponent;
  const int nb = static_cast<int>(batch.size());

  TrainingGradient grad;
  grad.directions.assign(nodes, Vec3::Zero());
  grad.weights.assign(topo.leaves(), 0.0);

  std::vector<Chain> chains(nb);
  std::vector<Mat6> deltas(nb);
  std::vector<double> ratios(nb), ref_norms(nb);
  double sum_rq = 0;
  for (int s = 0; s < nb; ++s) {
    const StiffnessMatrix fit =
        forward_chain(params, batch[s].c_first, batch[s].c_second, &chains[s]);
    deltas[s] = batch[s].c_reference.mandel() - fit.mandel();
    ref_norms[s] = batch[s].c_reference.norm_entrywise(p);
    const double num = StiffnessMatrix(deltas[s]).norm_entrywise(p);
    ratios[s] = num / ref_norms[s];
    sum_rq += std::pow(ratios[s], q);
  }
  const double excess = clamped_weight_sum(params) - 1.0;
  grad.value = std::pow(sum_rq, 1.0 / q) / nb + config.weight_penalty * excess * excess;

  for (int leaf = 0; leaf < topo.leaves(); ++leaf)
    if (params.weights[leaf] > 0) grad.weights[leaf] += 2.0 * config.weight_penalty * excess;

  if (!(sum_rq > 0)) return grad;  // perfect fit: only the penalty acts

  std::vector<Mat6> adj_stiffness(nodes);
  std::vector<double> adj_weight(nodes);
  for (int s = 0; s < nb; ++s) {
    const Chain& chain = chains[s];
    const double dj_dr =
        std::pow(sum_rq, (1.0 - q) / q) * std::pow(ratios[s], q - 1.0) / nb;
    const double num = ratios[s] * ref_norms[s];
    // J depends on the network through reference - fit, hence the sign flip.
    const Mat6 seed =
        (-dj_dr / ref_norms[s]) * entrywise_norm_gradient(deltas[s], p, num);
    for (int node = 0; node < nodes; ++node) {
      adj_stiffness[node].setZero();
      adj_weight[node] = 0;
    }
    adj_stiffness[topo.root()] = seed;
    for (int node = topo.root(); node >= 0; --node) {
      const LaminateAdjoint adj =
          laminate_pullback(adj_stiffness[node], chain.workspaces[node],
                            UnitVector3(chain.unit_normals[node]), chain.fractions[node]);
      const Vec3& n = chain.unit_normals[node];
      grad.directions[node] +=
          (adj.adj_normal - n * n.dot(adj.adj_normal)) / chain.direction_norms[node];
      const double w_left = chain.weight_left[node], w_right = chain.weight_right[node];
      const double total = w_left + w_right;
      double a_left = adj_weight[node], a_right = adj_weight[node];
      if (total > 0) {
        a_left += adj.adj_c1 * w_right / (total * total);
        a_right -= adj.adj_c1 * w_left / (total * total);
      }
      if (topo.children_are_leaves(node)) {
        const int l0 = topo.leaf_child(node, 0), l1 = topo.leaf_child(node, 1);
        if (params.weights[l0] > 0) grad.weights[l0] += a_left;
        if (params.weights[l1] > 0) grad.weights[l1] += a_right;
      } else {
        adj_weight[topo.child(node, 0)] += a_left;
        adj_weight[topo.child(node, 1)] += a_right;
        adj_stiffness[topo.child(node, 0)] += adj.adj_first;
        adj_stiffness[topo.child(node, 1)] += adj.adj_second;
      }
    }
  }
  return grad;
}

double mean_error(const TrainingParameters& params,
                  const std::vector<StiffnessSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("mean_error: empty sample set");
  double e = 0;
  for (const StiffnessSample& s : samples) {
    const StiffnessMatrix fit = network_stiffness(params, s.c_first, s.c_second);
    e += (fit - s.c_reference).norm_entrywise(1) / s.c_reference.norm_entrywise(1);
  }
  return e / static_cast<double>(samples.size());
}

double modulated_rate(const TrainingConfig& config, int epoch) {
  const double envelope =
      config.rate_min +
      0.5 * (config.rate_max - config.rate_min) *
          (1.0 + std::cos(std::numbers::pi * epoch / config.modulation_period));
  return std::pow(config.decay, epoch) * envelope;
}

TrainingResult train(const TrainingConfig& config, const std::vector<StiffnessSample>& samples) {
  config.validate();
  const int total = static_cast<int>(samples.size());
  const int n_train = static_cast<int>(std::floor(config.split * total));
  if (n_train < config.batch_size)
    throw std::invalid_argument("train: training split smaller than one batch");

  std::mt19937_64 rng(config.seed);
  TrainingParameters params = random_parameters(config.depth, rng);

  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  const std::vector<int> val_idx(order.begin() + n_train, order.end());

  const auto subset = [&](const std::vector<int>& idx, int begin, int count) {
    std::vector<StiffnessSample> out;
    out.reserve(count);
    for (int i = begin; i < begin + count; ++i) out.push_back(samples[idx[i]]);
    return out;
  };
  const std::vector<StiffnessSample> train_set = subset(train_idx, 0, n_train);
  const std::vector<StiffnessSample> val_set =
      subset(val_idx, 0, static_cast<int>(val_idx.size()));

  // One optimizer state across both parameter blocks, directions first.
  const TreeTopology topo(config.depth);
  const int n_par = 3 * topo.nodes() + topo.leaves();
  std::vector<double> adam_m(n_par, 0.0), adam_v(n_par, 0.0), adam_vhat(n_par, 0.0);
  long step = 0;
  const auto update = [&](double& value, double g, int k, double rate) {
    adam_m[k] = kBeta1 * adam_m[k] + (1.0 - kBeta1) * g;
    adam_v[k] = kBeta2 * adam_v[k] + (1.0 - kBeta2) * g * g;
    adam_vhat[k] = std::max(adam_vhat[k], adam_v[k]);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    value -= rate / bc1 * adam_m[k] / (std::sqrt(adam_vhat[k] / bc2) + kAdamEpsilon);
  };

  TrainingResult result;
  result.history.reserve(config.epochs);
  const int n_batches = n_train / config.batch_size;
  std::vector<StiffnessSample> batch(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = modulated_rate(config, epoch);
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0;
    for (int b = 0; b < n_batches; ++b) {
      for (int i = 0; i < config.batch_size; ++i)
        batch[i] = samples[train_idx[b * config.batch_size + i]];
      const TrainingGradient grad = training_loss_gradient(params, batch, config);
      if (!std::isfinite(grad.value))
        throw ConvergenceError("training loss became non-finite at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b),
                               epoch, {});
      loss_sum += grad.value;
      ++step;
      int k = 0;
      for (int node = 0; node < topo.nodes(); ++node)
        for (int c = 0; c < 3; ++c, ++k)
          update(params.directions[node][c], grad.directions[node][c], k, rate);
      for (int leaf = 0; leaf < topo.leaves(); ++leaf, ++k)
        update(params.weights[leaf], grad.weights[leaf], k, rate);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = n_batches > 0 ? loss_sum / n_batches : 0.0;
    record.error_train = mean_error(params, train_set);
    record.error_val = val_set.empty() ? 0.0 : mean_error(params, val_set);
    record.rate = rate;
    result.history.push_back(record);
  }
  result.weight_sum = clamped_weight_sum(params);
  result.model = params.to_model();
  return result;
}

namespace {

nlohmann::json matrix_to_json(const StiffnessMatrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a.push_back(m.mandel()(i, j));
  return a;
}

StiffnessMatrix matrix_from_json(const nlohmann::json& a, const char* field) {
  if (!a.is_array() || a.size() != 36)
    throw IoError(std::string("sample file: field '") + field + "' must hold 36 numbers");
  Mat6 m;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const nlohmann::json& x = a[6 * i + j];
      if (!x.is_number() || !std::isfinite(x.get<double>()))
        throw IoError(std::string("sample file: non-finite entry in '") + field + "'");
      m(i, j) = x.get<double>();
    }
  return StiffnessMatrix(m);
}

}  // namespace

std::vector<StiffnessSample> samples_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("sample file: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("sample file: " + std::string(e.what()));
  }
  if (j.value("format_version", 0) != 1) throw IoError("sample file: unsupported format_version");
  if (!j.contains("samples") || !j["samples"].is_array())
    throw IoError("sample file: missing samples array");
  std::vector<StiffnessSample> out;
  out.reserve(j["samples"].size());
  for (const nlohmann::json& s : j["samples"]) {
    StiffnessSample sample;
    sample.c_first = matrix_from_json(s.value("first", nlohmann::json()), "first");
    sample.c_second = matrix_from_json(s.value("second", nlohmann::json()), "second");
    sample.c_reference = matrix_from_json(s.value("reference", nlohmann::json()), "reference");
    out.push_back(sample);
  }
  return out;
}

void write_sample_file(const std::string& path, const std::vector<StiffnessSample>& samples) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["ordering"] = "mandel components 11,22,33,12,13,23 row-major; shear rows and columns carry sqrt(2)";
  j["units"] = "MPa";
  nlohmann::json arr = nlohmann::json::array();
  for (const StiffnessSample& s : samples) {
    nlohmann::json e;
    e["first"] = matrix_to_json(s.c_first);
    e["second"] = matrix_to_json(s.c_second);
    e["reference"] = matrix_to_json(s.c_reference);
    arr.push_back(std::move(e));
  }
  j["samples"] = std::move(arr);
  std::ofstream f(path);
  if (!f) throw IoError("sample file: cannot write " + path);
  f << j.dump() << "\n";
  if (!f) throw IoError("sample file: write failed for " + path);
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream f(path);
  if (!f) throw IoError("history file: cannot write " + path);
  f << "epoch,loss,mean_error_train,mean_error_val,learning_rate\n";
  char line[160];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%d,%.12g,%.12g,%.12g,%.12g\n", r.epoch, r.loss,
                  r.error_train, r.error_val, r.rate);
    f << line;
  }
  if (!f) throw IoError("history file: write failed for " + path);
}

}  // namespace dmn
