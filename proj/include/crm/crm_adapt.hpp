#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "crm/energy_model.hpp"
#include "crm/synthetic_aed.hpp"

namespace crm {

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Decoupled weight decay on head / feature-map weights.
  double weight_decay = 0.0;
  /// The bias table is excluded from weight decay unless this is set.
  bool regularize_bias = false;
  int batch_size = 128;
  int steps = 3000;
  std::uint64_t seed = 0;
  /// Early stopping: 0 disables. When enabled a group-stratified validation
  /// split of `validation_fraction` is held out and the best-validation
  /// parameters are returned.
  int early_stop_patience = 0;
  double validation_fraction = 0.2;
  int validate_every = 100;
  FeatureKind feature_kind = FeatureKind::kIdentityQuad;
  int hidden_width = 64;
};

/// Library defaults: Adam with lr 1e-3 for linear feature maps, 1e-4 for the
/// MLP, batch 128, 3000 steps.
TrainConfig default_train_config(FeatureKind kind);

/// Extrapolated per-group bias B*(z) over a requested support, estimated from
/// train-distribution samples.
struct ExtrapolatedBias {
  GroupSet support;
  Eigen::VectorXd values;
  /// Bootstrap standard errors (empty unless requested).
  Eigen::VectorXd bootstrap_se;
  std::int64_t sample_count = 0;
};

/// Frozen model plus the test-side prior and bias tables of the adjusted
/// softmax predictor.
struct TestPredictor {
  EnergyModel model;
  GroupSet test_support;
  Eigen::VectorXd test_log_prior;  // log-sum-exps to 0 over test_support
  Eigen::VectorXd bias;            // aligned with test_support order
  std::string name;
};

/// Plain softmax group classifier over the train support (dense head, no
/// additive structure); the ERM baseline.
struct ErmModel {
  AttributeSpec attr;
  int input_dim = 0;
  FeatureMap feature_map;
  Eigen::MatrixXd head;  // |support| x feature dim
  Eigen::VectorXd head_bias;
  GroupSet support;
};

/// CRM step 1: Adam-optimized additive energy classifier. The train support
/// and log-prior table come from the empirical group counts. Deterministic
/// given config.seed. Throws a training-diverged error on non-finite loss.
EnergyModel fit_crm(const Dataset& train, const ShiftScenario& scenario,
                    const TrainConfig& config);

/// CRM step 2: B*(z) for every z in target_support, computed in log space by
/// a single streaming pass over the training sample. bootstrap_resamples > 0
/// additionally estimates a bootstrap standard error.
ExtrapolatedBias extrapolate_bias(const EnergyModel& model,
                                  const Dataset& train,
                                  const GroupSet& target_support,
                                  int bootstrap_resamples = 0,
                                  std::uint64_t bootstrap_seed = 0);

TestPredictor make_test_predictor(const EnergyModel& model,
                                  const GroupSet& test_support,
                                  const Eigen::VectorXd& test_prior,
                                  const Eigen::VectorXd& bias,
                                  std::string name);

/// The canonical CRM predictor: uniform test prior and extrapolated bias.
TestPredictor crm_predictor(const EnergyModel& model, const Dataset& train,
                            const GroupSet& test_support);

/// Normalized posterior over the predictor's test support.
Eigen::VectorXd predict(const TestPredictor& predictor,
                        const Eigen::VectorXd& x);

LogitTable test_logits(const TestPredictor& predictor,
                       const Eigen::VectorXd& x);

/// q(z_i = k | x) = sum over groups with z_i = k of post[z].
Eigen::VectorXd marginalize(const Eigen::VectorXd& post,
                            const GroupSet& support,
                            const AttributeSpec& spec, int attribute);

/// ERM baseline trained on the same data (support and class prior are
/// implicit in the dense head).
ErmModel fit_erm_group(const Dataset& train, const ShiftScenario& scenario,
                       const TrainConfig& config);

Eigen::VectorXd predict_erm(const ErmModel& model, const Eigen::VectorXd& x);

/// The four predictors of the ablation study, crossing {extrapolated bias,
/// trained bias with 0 for unseen groups} x {uniform, empirical test prior}.
/// The empirical prior is estimated from the provided test labels (oracle
/// knowledge, as in the paper's ablation).
std::vector<TestPredictor> ablation_variants(const EnergyModel& model,
                                             const Dataset& train,
                                             const ShiftScenario& scenario,
                                             const std::vector<Group>& test_labels);

/// Mean negative log probability assigned to the true group; +inf when a
/// label falls outside the support (e.g. ERM on a dropped group).
double compositional_risk(const std::vector<Eigen::VectorXd>& posteriors,
                          const GroupSet& support,
                          const std::vector<Group>& labels);

}  // namespace crm
