#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "crm/attribute_space.hpp"
#include "crm/synthetic_aed.hpp"

namespace crm {

enum class FeatureKind {
  kIdentity,      // phi(x) = x
  kIdentityQuad,  // phi(x) = [x, ||x||^2]; per-attribute quadratic energies
                  // are linear in these features
  kMlp,           // phi(x) = tanh(W1 x + b1)
};

struct FeatureMap {
  FeatureKind kind = FeatureKind::kIdentity;
  int input_dim = 0;
  Eigen::MatrixXd w1;  // hidden x input, kMlp only
  Eigen::VectorXd b1;  // hidden, kMlp only

  int output_dim() const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Feature matrix for a batch (rows are samples).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
};

/// Additive energy classifier (train side): energies E(x) = head * phi(x),
/// per-group bias table and train log-prior table on the train support.
struct EnergyModel {
  AttributeSpec attr;
  int input_dim = 0;
  FeatureMap feature_map;
  Eigen::MatrixXd head;  // total_onehot_len x feature dim
  GroupSet train_support;
  Eigen::VectorXd bias;       // aligned with train_support order
  Eigen::VectorXd log_prior;  // aligned with train_support order

  int num_parameters() const;
};

/// Pre-softmax scores for each group of a stated support. The support pointer
/// refers into the producing model/predictor and is valid while it lives.
struct LogitTable {
  Eigen::VectorXd values;
  const GroupSet* support = nullptr;
};

struct EnergyModelGradients {
  Eigen::MatrixXd d_head;
  Eigen::MatrixXd d_w1;
  Eigen::VectorXd d_b1;
  Eigen::VectorXd d_bias;
};

struct LossResult {
  double loss = 0.0;
  EnergyModelGradients grads;
};

/// Fresh model with head and feature-map weights drawn from a seeded Gaussian
/// of scale 0.01 and a zero bias table.
EnergyModel init_energy_model(const AttributeSpec& attr, int input_dim,
                              FeatureKind kind, int hidden_width,
                              const GroupSet& train_support,
                              const Eigen::VectorXd& log_prior,
                              std::uint64_t seed);

/// Exact model for a Gaussian AED: energies from the analytic quadratic form
/// (constants folded into the bias table), so the train posterior equals the
/// Bayes posterior of the generative model.
EnergyModel analytic_energy_model(const GaussianAedSpec& aed,
                                  const GroupSet& support,
                                  const Eigen::VectorXd& prior);

/// E(x): concatenated per-attribute, per-value energy components.
Eigen::VectorXd energies(const EnergyModel& model, const Eigen::VectorXd& x);

/// Broadcast construction: <sigma(z), E> for every z of the full grid, in
/// flat-index order, built by iterated outer sums of the per-attribute blocks.
Eigen::VectorXd energy_group_sums(const Eigen::VectorXd& energy_vector,
                                  const AttributeSpec& attr);

/// logit(z) = -<sigma(z), E(x)> + log prior(z) - bias(z) over train support,
/// computed on the broadcast grid and restricted to the support.
LogitTable train_logits(const EnergyModel& model, const Eigen::VectorXd& x);

/// Numerically stable log-softmax of train_logits.
Eigen::VectorXd log_posterior_train(const EnergyModel& model,
                                    const Eigen::VectorXd& x);

/// Positions of the labels inside the model's train support; labels outside
/// the support raise a support mismatch error.
std::vector<int> support_indices(const GroupSet& support,
                                 const std::vector<Group>& labels);

/// Mean negative log posterior over the batch plus exact gradients for all
/// parameters (head, feature map, bias table).
LossResult nll_loss(const EnergyModel& model, const Eigen::MatrixXd& batch_x,
                    const std::vector<int>& label_indices);

/// Log of empirical frequencies of labels over the support (no smoothing;
/// call sites must restrict the support to groups with positive counts).
Eigen::VectorXd log_prior_from_counts(const std::vector<Group>& labels,
                                      const GroupSet& support);

}  // namespace crm
