#include "dmn/solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "dmn/errors.hpp"

namespace dmn {

namespace {

// Block Cholesky on the interface Jacobian. Couplings exist only between a
// node and its ancestors, and the node order puts children first, so the
// elimination is fill-in free: every update lands on an ancestor pair, which
// is structurally present. Column ci stores the diagonal block first and then
// one block per active ancestor, nearest first.
class TreeFactor {
 public:
  TreeFactor(std::vector<std::vector<Mat3>>& cols, const std::vector<const std::vector<int>*>& paths)
      : cols_(cols), paths_(paths) {}

  void factorize() {
    const int n = static_cast<int>(cols_.size());
    for (int ci = 0; ci < n; ++ci) {
      auto& col = cols_[ci];
      Eigen::LLT<Mat3> llt(col[0]);
      if (llt.info() != Eigen::Success)
        throw ConvergenceError("interface Jacobian is not positive definite", 0, {});
      col[0] = llt.matrixL();
      const auto lower = col[0].triangularView<Eigen::Lower>();
      const int m = static_cast<int>(col.size()) - 1;
      for (int j = 1; j <= m; ++j) {
        Mat3 rhs_t = col[j].transpose();
        lower.solveInPlace(rhs_t);  // B <- B L^{-T}
        col[j] = rhs_t.transpose();
      }
      const std::vector<int>& path = *paths_[ci];
      for (int i = 1; i <= m; ++i) {
        auto& target = cols_[path[i - 1]];
        for (int j = i; j <= m; ++j) target[j - i] -= col[j] * col[i].transpose();
      }
    }
  }

  // Solves L L^T x = b in place; B has 3 rows and any column count.
  template <typename B>
  void solve(std::vector<B>& b) const {
    const int n = static_cast<int>(cols_.size());
    for (int ci = 0; ci < n; ++ci) {
      const auto& col = cols_[ci];
      col[0].triangularView<Eigen::Lower>().solveInPlace(b[ci]);
      const std::vector<int>& path = *paths_[ci];
      for (size_t j = 1; j < col.size(); ++j) b[path[j - 1]] -= col[j] * b[ci];
    }
    for (int ci = n - 1; ci >= 0; --ci) {
      const auto& col = cols_[ci];
      const std::vector<int>& path = *paths_[ci];
      for (size_t j = 1; j < col.size(); ++j) b[ci] -= col[j].transpose() * b[path[j - 1]];
      col[0].transpose().triangularView<Eigen::Upper>().solveInPlace(b[ci]);
    }
  }

 private:
  std::vector<std::vector<Mat3>>& cols_;
  const std::vector<const std::vector<int>*>& paths_;
};

}  // namespace

DmnEvaluator::DmnEvaluator(DmnModel model, const GsmMaterial& first_phase,
                           const GsmMaterial& second_phase, SolverSettings settings)
    : model_(std::move(model)),
      first_(first_phase),
      second_(second_phase),
      settings_(settings),
      topo_(model_.depth) {
  model_.validate();
  const std::vector<double> fractions = volume_fractions(model_);
  const std::vector<bool> active = active_nodes(model_);
  nodes_.resize(topo_.nodes());
  for (int node = 0; node < topo_.nodes(); ++node) {
    NodeInfo& info = nodes_[node];
    info.s = sym_dyad_matrix(model_.directions[node].vec());
    info.c1 = fractions[node];
    info.active = active[node];
    if (info.active) {
      info.compact = static_cast<int>(active_list_.size());
      active_list_.push_back(node);
    }
  }
  // Ancestor paths in compact indices with the signed jump coefficients: an
  // ancestor acts on this subtree with +c2 if it sits on the first-child
  // side, -c1 on the second.
  for (int node : active_list_) {
    NodeInfo& info = nodes_[node];
    int cur = node;
    while (topo_.level_of(cur) > 1) {
      const int side = topo_.index_in_level(cur) % 2;
      const int up = topo_.parent(cur);
      if (nodes_[up].active) {
        info.path.push_back(nodes_[up].compact);
        info.path_coefficient.push_back(side == 0 ? 1.0 - nodes_[up].c1 : -nodes_[up].c1);
      }
      cur = up;
    }
  }
}

DmnState DmnEvaluator::initial_state() const {
  DmnState state;
  state.leaf_states.reserve(topo_.leaves());
  for (int leaf = 0; leaf < topo_.leaves(); ++leaf)
    state.leaf_states.push_back(leaf_material(leaf).initial_state());
  state.leaf_strains.resize(topo_.leaves());
  state.jumps.assign(topo_.nodes(), Vec3::Zero());
  return state;
}

double DmnEvaluator::effective_heat_capacity() const {
  double c = 0;
  for (int leaf = 0; leaf < topo_.leaves(); ++leaf)
    c += model_.weights[leaf] * leaf_material(leaf).heat_capacity();
  return c;
}

DmnOutput DmnEvaluator::evaluate(const SymTensor& strain, double theta, double dt,
                                 DmnState& state) const {
  if (!(dt > 0) || !(theta > 0)) throw std::invalid_argument("evaluate: need dt > 0, theta > 0");
  if (static_cast<int>(state.leaf_states.size()) != topo_.leaves() ||
      static_cast<int>(state.leaf_strains.size()) != topo_.leaves() ||
      static_cast<int>(state.jumps.size()) != topo_.nodes())
    throw std::invalid_argument("evaluate: state does not match the tree");

  const int leaves = topo_.leaves();
  const int node_count = topo_.nodes();
  const int n_active = static_cast<int>(active_list_.size());

  std::vector<Vec3> jumps = state.jumps;
  for (int node = 0; node < node_count; ++node)
    if (!nodes_[node].active) jumps[node] = Vec3::Zero();

  std::vector<Vec6> eps(leaves), sig(leaves);
  std::vector<Mat6> tang(leaves);
  std::vector<Vec6> t_sum(node_count);

  const auto compute_strains = [&](const std::vector<Vec3>& a) {
    for (int leaf = 0; leaf < leaves; ++leaf) eps[leaf] = strain.mandel();
    for (int node : active_list_) {
      const NodeInfo& info = nodes_[node];
      const Vec6 shift = info.s * a[node];
      const auto [begin, end] = topo_.leaf_range(node);
      const int mid = begin + (end - begin) / 2;
      for (int leaf = begin; leaf < mid; ++leaf) eps[leaf] += (1.0 - info.c1) * shift;
      for (int leaf = mid; leaf < end; ++leaf) eps[leaf] -= info.c1 * shift;
    }
  };

  // Weighted child sums of the current per-leaf 6-vectors in `sig`; returns
  // the normalized force residual and fills r (minus the Newton right-hand
  // side) for the active nodes.
  std::vector<Vec3> r(n_active);
  const auto force_residual = [&]() {
    double norm_sq = 0;
    for (int node = 0; node < node_count; ++node) {
      const NodeInfo& info = nodes_[node];
      Vec6 t_first, t_second;
      if (topo_.children_are_leaves(node)) {
        const int l0 = topo_.leaf_child(node, 0), l1 = topo_.leaf_child(node, 1);
        t_first = model_.weights[l0] * sig[l0];
        t_second = model_.weights[l1] * sig[l1];
      } else {
        t_first = t_sum[topo_.child(node, 0)];
        t_second = t_sum[topo_.child(node, 1)];
      }
      t_sum[node] = t_first + t_second;
      if (info.active) {
        const Vec3 f = info.s.transpose() * ((1.0 - info.c1) * t_first - info.c1 * t_second);
        r[info.compact] = f;
        norm_sq += f.squaredNorm();
      }
    }
    const double stress_norm = std::max(t_sum[topo_.root()].norm(), 1.0);
    const double res = std::sqrt(norm_sq) / (node_count * stress_norm);
    return std::isfinite(res) ? res : std::numeric_limits<double>::infinity();
  };

  const auto residual_at = [&](const std::vector<Vec3>& a) {
    compute_strains(a);
    for (int leaf = 0; leaf < leaves; ++leaf)
      sig[leaf] =
          leaf_material(leaf).stress(SymTensor(eps[leaf]), theta, dt, state.leaf_states[leaf])
              .mandel();
    return force_residual();
  };

  // Per-node weighted tangent sums: total (p_sum) and first/second child
  // parts, from which the Jacobian blocks and sensitivity right-hand sides
  // assemble. u_mid = c2 T_first - c1 T_second.
  std::vector<Mat6> p_sum(node_count);
  std::vector<Mat6> u_mid(node_count);
  const auto accumulate_tangents = [&]() {
    for (int node = 0; node < node_count; ++node) {
      const NodeInfo& info = nodes_[node];
      Mat6 t_first, t_second;
      if (topo_.children_are_leaves(node)) {
        const int l0 = topo_.leaf_child(node, 0), l1 = topo_.leaf_child(node, 1);
        t_first = model_.weights[l0] * tang[l0];
        t_second = model_.weights[l1] * tang[l1];
      } else {
        t_first = p_sum[topo_.child(node, 0)];
        t_second = p_sum[topo_.child(node, 1)];
      }
      p_sum[node] = t_first + t_second;
      u_mid[node] = (1.0 - info.c1) * t_first - info.c1 * t_second;
    }
  };

  std::vector<std::vector<Mat3>> cols(n_active);
  std::vector<const std::vector<int>*> paths(n_active);
  for (int ci = 0; ci < n_active; ++ci) paths[ci] = &nodes_[active_list_[ci]].path;
  const auto assemble_jacobian = [&]() {
    for (int ci = 0; ci < n_active; ++ci) {
      const int node = active_list_[ci];
      const NodeInfo& info = nodes_[node];
      const double c1 = info.c1, c2 = 1.0 - c1;
      // c2^2 T_first + c1^2 T_second = p_sum scaled parts; recover the parts
      // from p_sum and u_mid: T_first = c1 p_sum + u_mid, T_second = c2 p_sum - u_mid.
      const Mat6 diag_mid = c2 * c2 * (c1 * p_sum[node] + u_mid[node]) +
                            c1 * c1 * (c2 * p_sum[node] - u_mid[node]);
      auto& col = cols[ci];
      col.assign(info.path.size() + 1, Mat3::Zero());
      col[0] = info.s.transpose() * diag_mid * info.s;
      const Eigen::Matrix<double, 6, 3> v = u_mid[node] * info.s;
      for (size_t j = 0; j < info.path.size(); ++j)
        col[j + 1] = info.path_coefficient[j] *
                     (nodes_[active_list_[info.path[j]]].s.transpose() * v);
    }
  };

  // Newton iteration on the interface equilibrium, backtracking on the
  // normalized residual. The loop always performs at least one solve; at an
  // already-converged warm start the increment is zero.
  double res = residual_at(jumps);
  std::vector<double> history{res};
  std::vector<Vec3> delta(n_active);
  bool converged = false;
  int iterations = 0;
  for (int it = 1; it <= settings_.max_iterations && !converged; ++it) {
    compute_strains(jumps);
    for (int leaf = 0; leaf < leaves; ++leaf) {
      SymTensor s_out;
      leaf_material(leaf).stress_tangent(SymTensor(eps[leaf]), theta, dt,
                                         state.leaf_states[leaf], s_out, tang[leaf]);
      sig[leaf] = s_out.mandel();
    }
    force_residual();  // refreshes r at the current iterate
    accumulate_tangents();
    assemble_jacobian();
    TreeFactor factor(cols, paths);
    factor.factorize();
    for (int ci = 0; ci < n_active; ++ci) delta[ci] = -r[ci];
    factor.solve(delta);

    const double res_old = res;
    for (int ci = 0; ci < n_active; ++ci) jumps[active_list_[ci]] += delta[ci];
    res = residual_at(jumps);
    for (int bt = 0; bt < settings_.max_backtrack && !(res < res_old); ++bt) {
      const double pull = std::pow(settings_.shrink, bt) * (1.0 - settings_.shrink);
      for (int ci = 0; ci < n_active; ++ci) jumps[active_list_[ci]] -= pull * delta[ci];
      res = residual_at(jumps);
    }
    history.push_back(res);
    iterations = it;
    if (res < settings_.tolerance) converged = true;
  }
  if (!converged)
    throw ConvergenceError("interface equilibrium did not converge", iterations, history);

  // Full response at the converged point: effective averages plus the four
  // sensitivity assemblies, all from one consistent set of leaf responses.
  compute_strains(jumps);
  std::vector<MaterialState> new_states(leaves);
  std::vector<Vec6> dsig_dtheta(leaves), dcpl_deps(leaves);
  DmnOutput out;
  out.iterations = iterations;
  std::vector<Vec6> tth_sum(node_count), tcpl_sum(node_count);
  for (int leaf = 0; leaf < leaves; ++leaf) {
    const GsmResponse rsp =
        leaf_material(leaf).respond(SymTensor(eps[leaf]), theta, dt,
                                    state.leaf_strains[leaf], state.leaf_states[leaf],
                                    new_states[leaf]);
    const double w = model_.weights[leaf];
    sig[leaf] = rsp.stress.mandel();
    tang[leaf] = rsp.dstress_dstrain;
    dsig_dtheta[leaf] = rsp.dstress_dtheta.mandel();
    dcpl_deps[leaf] = rsp.dcoupling_dstrain.mandel();
    out.coupling += w * rsp.coupling;
    out.dissipation += w * rsp.dissipation;
    out.coupling_theta += w * rsp.dcoupling_dtheta;
  }
  force_residual();
  out.stress = SymTensor(t_sum[topo_.root()]);
  out.residual = res;
  accumulate_tangents();
  assemble_jacobian();
  TreeFactor factor(cols, paths);
  factor.factorize();

  // Child-split weighted sums of the theta- and coupling-derivatives.
  const auto child_split = [&](const std::vector<Vec6>& leaf_vec, std::vector<Vec6>& sums,
                               int node, Vec6& first, Vec6& second) {
    if (topo_.children_are_leaves(node)) {
      const int l0 = topo_.leaf_child(node, 0), l1 = topo_.leaf_child(node, 1);
      first = model_.weights[l0] * leaf_vec[l0];
      second = model_.weights[l1] * leaf_vec[l1];
    } else {
      first = sums[topo_.child(node, 0)];
      second = sums[topo_.child(node, 1)];
    }
    sums[node] = first + second;
  };

  using Rhs = Eigen::Matrix<double, 3, 7>;
  std::vector<Rhs> rhs(n_active);
  std::vector<Vec3> cpl_dir(n_active);  // S^T (c2 tD_first - c1 tD_second)
  for (int node = 0; node < node_count; ++node) {
    const NodeInfo& info = nodes_[node];
    Vec6 th_first, th_second, cp_first, cp_second;
    child_split(dsig_dtheta, tth_sum, node, th_first, th_second);
    child_split(dcpl_deps, tcpl_sum, node, cp_first, cp_second);
    if (!info.active) continue;
    const double c2 = 1.0 - info.c1;
    Rhs& b = rhs[info.compact];
    b.leftCols<6>() = -(info.s.transpose() * u_mid[node]);
    b.col(6) = -(info.s.transpose() * (c2 * th_first - info.c1 * th_second));
    cpl_dir[info.compact] = info.s.transpose() * (c2 * cp_first - info.c1 * cp_second);
  }
  factor.solve(rhs);

  Mat6 c_eps = p_sum[topo_.root()];
  Vec6 c_theta = tth_sum[topo_.root()];
  Vec6 d_eps = tcpl_sum[topo_.root()];
  double d_theta = out.coupling_theta;
  for (int ci = 0; ci < n_active; ++ci) {
    const int node = active_list_[ci];
    const Eigen::Matrix<double, 6, 3> v = u_mid[node] * nodes_[node].s;
    c_eps += v * rhs[ci].leftCols<6>();
    c_theta += v * rhs[ci].col(6);
    d_eps += rhs[ci].leftCols<6>().transpose() * cpl_dir[ci];
    d_theta += rhs[ci].col(6).dot(cpl_dir[ci]);
  }
  out.tangent_strain = StiffnessMatrix(c_eps);
  out.tangent_theta = SymTensor(c_theta);
  out.coupling_strain = SymTensor(d_eps);
  out.coupling_theta = d_theta;

  state.leaf_states = std::move(new_states);
  for (int leaf = 0; leaf < leaves; ++leaf) state.leaf_strains[leaf] = SymTensor(eps[leaf]);
  state.jumps = std::move(jumps);
  return out;
}

}  // namespace dmn
