#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crm/attribute_space.hpp"

namespace crm {

struct GroupAccuracy {
  Group group;
  std::int64_t sample_count = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;
  /// Set for groups with zero test samples; such groups are excluded from the
  /// worst-group minimum and the balanced mean.
  bool empty = false;
};

struct EvalReport {
  std::vector<GroupAccuracy> per_group;
  double average_acc = 0.0;     // count-weighted mean
  double worst_group_acc = 0.0; // min over non-empty groups
  double balanced_acc = 0.0;    // unweighted mean over non-empty groups
  std::optional<double> oracle_agreement;
  std::optional<double> oracle_mean_tv;
  std::string scenario_id;
  std::string method;
  std::uint64_t seed = 0;
};

/// Per-group accuracy of predicting attribute `target_attribute`:
/// predictions[i] is the predicted value, labels[i] the true group. Groups
/// come from `groups` (every label group must be present there).
EvalReport evaluate(const std::vector<int>& predictions,
                    const std::vector<Group>& labels, int target_attribute,
                    const GroupSet& groups);

/// Same metrics with whole-group predictions (correct iff all attributes
/// match).
EvalReport evaluate_groups(const std::vector<Group>& predictions,
                           const std::vector<Group>& labels,
                           const GroupSet& groups);

struct AgreementResult {
  double argmax_agreement = 0.0;
  double mean_total_variation = 0.0;
};

/// Fraction of samples where the two posterior tables share an argmax, plus
/// the mean total-variation distance. Both lists must be over the same
/// support and sample order.
AgreementResult oracle_agreement(
    const std::vector<Eigen::VectorXd>& predictor_posteriors,
    const std::vector<Eigen::VectorXd>& bayes_posteriors);

}  // namespace crm
