#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dmn/model.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

// One training triple: two phase stiffnesses and the reference effective
// stiffness they homogenize to.
struct StiffnessSample {
  StiffnessMatrix c_first;
  StiffnessMatrix c_second;
  StiffnessMatrix c_reference;
};

struct TrainingConfig {
  int depth = 3;
  int batch_size = 32;
  double norm_exponent = 1;     // p of the componentwise matrix norm
  double stack_exponent = 10;   // q of the batch aggregation
  double weight_penalty = 1e3;  // multiplier on the weight-sum constraint
  double rate_max = 1.5e-2;
  double rate_min = 1.5e-3;
  int modulation_period = 50;  // half period of the cosine modulation
  double decay = 0.999;        // geometric decay per epoch
  int epochs = 500;
  double split = 0.9;  // training fraction of the dataset
  unsigned long long seed = 0;

  void validate() const;
};

// Unconstrained optimization variables: directions live in R^3 and are
// normalized on use; weights live in R and are clamped at zero on use.
struct TrainingParameters {
  int depth = 1;
  std::vector<Vec3> directions;  // one per tree node
  std::vector<double> weights;   // one per leaf

  // Clamp, renormalize to unit sum, and validate.
  DmnModel to_model() const;
};

struct TrainingGradient {
  double value = 0;
  std::vector<Vec3> directions;
  std::vector<double> weights;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0;
  double error_train = 0;
  double error_val = 0;
  double rate = 0;
};

struct TrainingResult {
  DmnModel model;
  std::vector<EpochRecord> history;
  // Sum of the clamped weights before the final renormalization; the penalty
  // must have kept it close to one.
  double weight_sum = 0;
};

// Draws one phase-stiffness pair: the first isotropic, the second isotropic
// minus a rank-one deviatoric reduction. Bulk and shear moduli log-uniform on
// [100, 1e5] MPa, reduction factor uniform on [0, 0.995].
std::pair<StiffnessMatrix, StiffnessMatrix> sample_stiffness_pair(std::mt19937_64& rng);

// max(largest eigenvalue of one / smallest of the other, both ways); throws
// std::invalid_argument unless both matrices are positive definite.
double material_contrast(const StiffnessMatrix& c_first, const StiffnessMatrix& c_second);

// Random initialization: directions uniform on the sphere, weights uniform on
// [0, 1] rescaled to unit sum.
TrainingParameters random_parameters(int depth, std::mt19937_64& rng);

// Effective stiffness of the parameterized tree for one phase pair; weights
// enter clamped but unnormalized (the fractions only see ratios).
StiffnessMatrix network_stiffness(const TrainingParameters& params,
                                  const StiffnessMatrix& c_first,
                                  const StiffnessMatrix& c_second);

double training_loss(const TrainingParameters& params,
                     const std::vector<StiffnessSample>& batch, const TrainingConfig& config);

// Exact reverse-mode gradient of training_loss with respect to the
// unconstrained variables; the clamp's subgradient at zero is zero.
TrainingGradient training_loss_gradient(const TrainingParameters& params,
                                        const std::vector<StiffnessSample>& batch,
                                        const TrainingConfig& config);

// Mean relative componentwise-l1 misfit over a sample set.
double mean_error(const TrainingParameters& params, const std::vector<StiffnessSample>& samples);

// Cosine-modulated, geometrically decayed learning rate for one epoch.
double modulated_rate(const TrainingConfig& config, int epoch);

// Full training run: split, batch, optimize, culminating in a normalized
// model. Throws ConvergenceError if the loss becomes non-finite.
TrainingResult train(const TrainingConfig& config, const std::vector<StiffnessSample>& samples);

// Dataset and history files.
std::vector<StiffnessSample> samples_from_file(const std::string& path);
void write_sample_file(const std::string& path, const std::vector<StiffnessSample>& samples);
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace dmn
