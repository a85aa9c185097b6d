#include "dmn/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dmn/errors.hpp"
#include "dmn/laminate.hpp"
#include "dmn/materials.hpp"
#include "dmn/model.hpp"

namespace dmn {
namespace {

UnitVector3 unit(double x, double y, double z) { return UnitVector3(Vec3(x, y, z)); }

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

// Compliant thermoelastic phase with the thermal data of the polymer matrix.
ThermoelasticParameters soft_parameters() {
  ThermoelasticParameters p;
  p.youngs_modulus = 3.0e3;
  p.poisson_ratio = 0.35;
  p.heat_capacity = 1.9e6;
  p.expansion = 70e-6;
  p.conductivity = 0.27;
  p.reference_temperature = 293.15;
  return p;
}

double rel_gap(const Mat6& a, const Mat6& b) { return (a - b).norm() / b.norm(); }

TEST(SolverTest, IdenticalElasticPhasesConvergeImmediately) {
  const ThermoelasticMaterial glass(glass_parameters());
  const DmnModel model = random_model(3, 11);
  const DmnEvaluator ev(model, glass, glass);
  DmnState state = ev.initial_state();
  const SymTensor strain = SymTensor::from_components(2e-3, -1e-3, 5e-4, 1e-3, 0, -4e-4);
  const double theta = 305.0, dt = 0.1;
  const DmnOutput out = ev.evaluate(strain, theta, dt, state);

  // A homogeneous medium is in equilibrium at zero jumps.
  EXPECT_EQ(out.iterations, 1);
  for (const Vec3& a : state.jumps) EXPECT_LT(a.norm(), 1e-12);

  MaterialState scratch;
  const GsmResponse r =
      glass.respond(strain, theta, dt, SymTensor::zero(), glass.initial_state(), scratch);
  EXPECT_LT((out.stress.mandel() - r.stress.mandel()).norm(), 1e-10 * r.stress.mandel().norm());
  EXPECT_NEAR(out.coupling, r.coupling, 1e-10 * std::abs(r.coupling));
  EXPECT_DOUBLE_EQ(out.dissipation, 0);
  EXPECT_LT(rel_gap(out.tangent_strain.mandel(), glass.elastic_stiffness().mandel()), 1e-10);
  EXPECT_LT((out.tangent_theta.mandel() - r.dstress_dtheta.mandel()).norm(), 1e-9);
  EXPECT_LT((out.coupling_strain.mandel() - r.dcoupling_dstrain.mandel()).norm(),
            1e-9 * r.dcoupling_dstrain.mandel().norm());
  EXPECT_NEAR(out.coupling_theta, r.dcoupling_dtheta, 1e-10);
}

TEST(SolverTest, DepthOneElasticMatchesLaminateKernel) {
  const ThermoelasticMaterial glass(glass_parameters());
  const ThermoelasticMaterial soft(soft_parameters());
  DmnModel model;
  model.depth = 1;
  model.directions = {unit(0.48, -0.6, 0.64)};
  model.weights = {0.3, 0.7};
  const DmnEvaluator ev(model, glass, soft);
  DmnState state = ev.initial_state();
  const SymTensor strain = SymTensor::from_components(1e-3, 2e-3, -5e-4, 8e-4, -3e-4, 6e-4);
  const DmnOutput out = ev.evaluate(strain, 293.15, 1.0, state);

  const StiffnessMatrix reference = laminate_stiffness(
      glass.elastic_stiffness(), soft.elastic_stiffness(), 0.3, model.directions[0]);
  EXPECT_LT(rel_gap(out.tangent_strain.mandel(), reference.mandel()), 1e-10);
  const Vec6 sigma = reference.mandel() * strain.mandel();
  EXPECT_LT((out.stress.mandel() - sigma).norm(), 1e-10 * sigma.norm());
}

TEST(SolverTest, ElasticSolveMatchesLinearHomogenization) {
  const ThermoelasticMaterial glass(glass_parameters());
  const ThermoelasticMaterial soft(soft_parameters());
  const SymTensor strain = SymTensor::from_components(-2e-3, 1e-3, 4e-4, -6e-4, 9e-4, 2e-4);
  for (int depth = 1; depth <= 4; ++depth) {
    for (unsigned seed = 0; seed < 3; ++seed) {
      const DmnModel model = random_model(depth, 100 * depth + seed);
      const DmnEvaluator ev(model, glass, soft);
      DmnState state = ev.initial_state();
      const DmnOutput out = ev.evaluate(strain, 293.15, 1.0, state);
      const StiffnessMatrix reference =
          homogenize_linear(model, glass.elastic_stiffness(), soft.elastic_stiffness());
      EXPECT_LT(rel_gap(out.tangent_strain.mandel(), reference.mandel()), 1e-10)
          << "depth " << depth << " seed " << seed;
      const Vec6 sigma = reference.mandel() * strain.mandel();
      EXPECT_LT((out.stress.mandel() - sigma).norm(), 1e-9 * sigma.norm());
      EXPECT_LE(out.iterations, 2);  // the problem is linear
    }
  }
}

TEST(SolverTest, StrainAverageAndPowerIdentityHold) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  const DmnModel model = random_model(3, 23);
  const DmnEvaluator ev(model, glass, matrix);
  DmnState state = ev.initial_state();
  const double theta = 315.0, dt = 0.05;
  ev.evaluate(SymTensor::from_components(3e-3, 0, -1e-3, 9e-3, 0, 4e-3), theta, dt, state);
  const DmnState before = state;
  const SymTensor strain = SymTensor::from_components(6e-3, -1e-3, -2e-3, 1.8e-2, 1e-3, 8e-3);
  const DmnOutput out = ev.evaluate(strain, theta, dt, state);

  // The jump field is average-free and transmits no power at equilibrium.
  Vec6 mean = Vec6::Zero();
  double micro_power = 0;
  const TreeTopology topo(model.depth);
  for (int leaf = 0; leaf < topo.leaves(); ++leaf) {
    const GsmMaterial& mat = TreeTopology::leaf_phase(leaf) == 0
                                 ? static_cast<const GsmMaterial&>(glass)
                                 : static_cast<const GsmMaterial&>(matrix);
    const Vec6 eps = state.leaf_strains[leaf].mandel();
    const Vec6 sig = mat.stress(state.leaf_strains[leaf], theta, dt, before.leaf_states[leaf]).mandel();
    mean += model.weights[leaf] * eps;
    micro_power += model.weights[leaf] * sig.dot(eps);
  }
  EXPECT_LT((mean - strain.mandel()).norm(), 1e-12);
  const double macro_power = out.stress.mandel().dot(strain.mandel());
  EXPECT_NEAR(micro_power, macro_power, 1e-9 * std::max(std::abs(macro_power), 1.0));
}

TEST(SolverTest, TangentsMatchFiniteDifferences) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  for (unsigned seed : {1u, 2u, 3u}) {
    const DmnModel model = random_model(3, 40 + seed);
    const DmnEvaluator ev(model, glass, matrix);
    DmnState state = ev.initial_state();
    const double theta = 310.0, dt = 0.05;
    // Drive the matrix well past yield so the probe sits on an inelastic branch.
    ev.evaluate(SymTensor::from_components(4e-3, -2e-3, 0, 1.2e-2, 0, 5e-3), theta, dt, state);
    ev.evaluate(SymTensor::from_components(8e-3, -4e-3, 1e-3, 2.4e-2, 2e-3, 1e-2), theta, dt,
                state);
    const SymTensor probe = SymTensor::from_components(1.0e-2, -5e-3, 1.5e-3, 3.0e-2, 3e-3, 1.3e-2);
    DmnState center = state;
    const DmnOutput out = ev.evaluate(probe, theta, dt, center);

    // Central differences at the frozen previous state.
    const double h = 1e-6, h_theta = 1e-3;
    Mat6 fd_c;
    Vec6 fd_d_eps;
    for (int j = 0; j < 6; ++j) {
      SymTensor ep = probe, em = probe;
      ep.mandel()[j] += h;
      em.mandel()[j] -= h;
      DmnState sp = state, sm = state;
      const DmnOutput op = ev.evaluate(ep, theta, dt, sp);
      const DmnOutput om = ev.evaluate(em, theta, dt, sm);
      fd_c.col(j) = (op.stress.mandel() - om.stress.mandel()) / (2 * h);
      fd_d_eps[j] = (op.coupling - om.coupling) / (2 * h);
    }
    DmnState sp = state, sm = state;
    const DmnOutput op = ev.evaluate(probe, theta + h_theta, dt, sp);
    const DmnOutput om = ev.evaluate(probe, theta - h_theta, dt, sm);
    const Vec6 fd_c_theta = (op.stress.mandel() - om.stress.mandel()) / (2 * h_theta);
    const double fd_d_theta = (op.coupling - om.coupling) / (2 * h_theta);

    EXPECT_LT(rel_gap(out.tangent_strain.mandel(), fd_c), 1e-5) << "seed " << seed;
    EXPECT_LT((out.tangent_theta.mandel() - fd_c_theta).norm(), 1e-5 * fd_c_theta.norm());
    EXPECT_LT((out.coupling_strain.mandel() - fd_d_eps).norm(), 1e-5 * fd_d_eps.norm());
    EXPECT_NEAR(out.coupling_theta, fd_d_theta, 1e-5 * std::abs(fd_d_theta));
    EXPECT_LT((out.tangent_strain.mandel() - out.tangent_strain.mandel().transpose()).norm(),
              1e-8 * out.tangent_strain.mandel().norm());
  }
}

TEST(SolverTest, WarmStartMatchesColdStart) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  const DmnModel model = random_model(3, 77);
  const DmnEvaluator ev(model, glass, matrix);
  const SymTensor strain = SymTensor::from_components(5e-3, -2e-3, 0, 1.5e-2, 1e-3, 6e-3);
  const double theta = 320.0, dt = 0.1;

  DmnState cold = ev.initial_state();
  const DmnOutput a = ev.evaluate(strain, theta, dt, cold);
  DmnState warm = ev.initial_state();
  warm.jumps = cold.jumps;
  const DmnOutput b = ev.evaluate(strain, theta, dt, warm);

  EXPECT_EQ(b.iterations, 1);
  EXPECT_LT((a.stress.mandel() - b.stress.mandel()).norm(), 1e-10 * a.stress.mandel().norm());
  EXPECT_NEAR(a.coupling, b.coupling, 1e-9 * std::abs(a.coupling));
  EXPECT_LT(rel_gap(a.tangent_strain.mandel(), b.tangent_strain.mandel()), 1e-10);
}

TEST(SolverTest, DissipationStaysNonnegative) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  const DmnModel model = random_model(3, 5);
  const DmnEvaluator ev(model, glass, matrix);
  DmnState state = ev.initial_state();
  std::mt19937 rng(9);
  std::normal_distribution<double> step(0.0, 6e-3);
  SymTensor strain;
  for (int n = 0; n < 8; ++n) {
    for (int j = 0; j < 6; ++j) strain.mandel()[j] += step(rng);
    const DmnOutput out = ev.evaluate(strain, 300.0 + 3.0 * n, 0.05, state);
    EXPECT_GE(out.dissipation, -1e-10) << "step " << n;
    EXPECT_LT(out.residual, 1e-12);
    EXPECT_LE(out.iterations, 12);
  }
}

TEST(SolverTest, ZeroWeightSubtreeMatchesPrunedTree) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  DmnModel big;
  big.depth = 2;
  big.directions = {unit(1, 0, 0), unit(0.6, 0, 0.8), unit(0, 1, 0)};
  big.weights = {0, 0, 0.3, 0.7};
  DmnModel small;
  small.depth = 1;
  small.directions = {unit(0.6, 0, 0.8)};
  small.weights = {0.3, 0.7};
  const DmnEvaluator ev_big(big, glass, matrix);
  const DmnEvaluator ev_small(small, glass, matrix);
  DmnState sb = ev_big.initial_state();
  DmnState ss = ev_small.initial_state();
  const double theta = 325.0, dt = 0.02;
  SymTensor strain;
  for (int n = 1; n <= 2; ++n) {
    strain = SymTensor::from_components(4e-3 * n, -1e-3 * n, 0, 1.1e-2 * n, 0, 3e-3 * n);
    const DmnOutput ob = ev_big.evaluate(strain, theta, dt, sb);
    const DmnOutput os = ev_small.evaluate(strain, theta, dt, ss);
    EXPECT_LT((ob.stress.mandel() - os.stress.mandel()).norm(),
              1e-12 * os.stress.mandel().norm());
    EXPECT_NEAR(ob.coupling, os.coupling, 1e-12 * std::abs(os.coupling));
    EXPECT_NEAR(ob.dissipation, os.dissipation, 1e-12 * std::abs(os.dissipation) + 1e-15);
    EXPECT_LT(rel_gap(ob.tangent_strain.mandel(), os.tangent_strain.mandel()), 1e-12);
    EXPECT_LT((ob.coupling_strain.mandel() - os.coupling_strain.mandel()).norm(),
              1e-12 * os.coupling_strain.mandel().norm());
    EXPECT_LT((sb.jumps[1] - ss.jumps[0]).norm(), 1e-12 * (1 + ss.jumps[0].norm()));
  }
}

TEST(SolverTest, NonConvergenceThrowsAndPreservesState) {
  const ThermoelasticMaterial glass(glass_parameters());
  const Pa66Material matrix(pa66_parameters());
  const DmnModel model = random_model(2, 3);
  SolverSettings strict;
  strict.tolerance = 1e-30;  // unreachable
  strict.max_iterations = 3;
  const DmnEvaluator ev(model, glass, matrix, strict);
  DmnState state = ev.initial_state();
  const DmnState before = state;
  const SymTensor strain = SymTensor::from_components(3e-3, 0, 0, 8e-3, 0, 0);
  try {
    ev.evaluate(strain, 310.0, 0.05, state);
    FAIL() << "expected a convergence failure";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations, 3);
    EXPECT_EQ(e.residual_history.size(), 4u);  // initial value plus one per iteration
    for (size_t i = 0; i < state.jumps.size(); ++i)
      EXPECT_EQ(state.jumps[i], before.jumps[i]);
    for (size_t l = 0; l < state.leaf_states.size(); ++l) {
      EXPECT_EQ(state.leaf_states[l].plastic_strain, before.leaf_states[l].plastic_strain);
      EXPECT_EQ(state.leaf_strains[l].mandel(), before.leaf_strains[l].mandel());
    }
  }
}

TEST(SolverTest, EffectiveHeatCapacityIsTheWeightedMean) {
  const ThermoelasticMaterial glass(glass_parameters());
  const ThermoelasticMaterial soft(soft_parameters());
  DmnModel model;
  model.depth = 2;
  model.directions = {unit(1, 0, 0), unit(0, 1, 0), unit(0, 0, 1)};
  model.weights = {0.08, 0.42, 0.08, 0.42};  // 16 percent first phase
  const DmnEvaluator ev(model, glass, soft);
  EXPECT_NEAR(ev.effective_heat_capacity(), 1.932e6, 1e-3);
}

TEST(SolverTest, InvalidArgumentsAreRejected) {
  const ThermoelasticMaterial glass(glass_parameters());
  const DmnModel model = random_model(2, 1);
  const DmnEvaluator ev(model, glass, glass);
  DmnState state = ev.initial_state();
  const SymTensor strain;
  EXPECT_THROW(ev.evaluate(strain, 300.0, 0.0, state), std::invalid_argument);
  EXPECT_THROW(ev.evaluate(strain, -5.0, 0.1, state), std::invalid_argument);
  DmnState truncated = state;
  truncated.jumps.pop_back();
  EXPECT_THROW(ev.evaluate(strain, 300.0, 0.1, truncated), std::invalid_argument);
}

}  // namespace
}  // namespace dmn
