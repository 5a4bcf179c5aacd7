#include "crm/evaluation.hpp"

#include <cmath>

#include "crm/util.hpp"

namespace crm {

namespace {

EvalReport build_report(const GroupSet& groups,
                        const std::vector<Group>& labels,
                        const std::vector<char>& correct_flags) {
  EvalReport report;
  report.per_group.resize(groups.size());
  for (int i = 0; i < groups.size(); ++i) {
    report.per_group[i].group = groups.at(i);
  }

  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int idx = groups.index_of(labels[s]);
    if (idx < 0) {
      throw Error(Error::Code::kSupportMismatch,
                  "label " + to_string(labels[s]) +
                      " missing from the report's group list");
    }
    report.per_group[idx].sample_count += 1;
    report.per_group[idx].correct += correct_flags[s] ? 1 : 0;
  }

  std::int64_t total = 0;
  std::int64_t total_correct = 0;
  double balanced_sum = 0.0;
  int non_empty = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (auto& g : report.per_group) {
    if (g.sample_count == 0) {
      g.empty = true;
      continue;
    }
    g.accuracy = static_cast<double>(g.correct) /
                 static_cast<double>(g.sample_count);
    total += g.sample_count;
    total_correct += g.correct;
    balanced_sum += g.accuracy;
    worst = std::min(worst, g.accuracy);
    ++non_empty;
  }
  report.average_acc =
      total > 0 ? static_cast<double>(total_correct) / total : 0.0;
  report.balanced_acc = non_empty > 0 ? balanced_sum / non_empty : 0.0;
  report.worst_group_acc = non_empty > 0 ? worst : 0.0;
  return report;
}

}  // namespace

EvalReport evaluate(const std::vector<int>& predictions,
                    const std::vector<Group>& labels, int target_attribute,
                    const GroupSet& groups) {
  if (predictions.size() != labels.size()) {
    throw Error(Error::Code::kInvalidArgument,
                "prediction and label lists must have equal length");
  }
  std::vector<char> correct(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (target_attribute < 0 || target_attribute >= labels[s].size()) {
      throw Error(Error::Code::kInvalidArgument,
                  "target attribute index out of range");
    }
    correct[s] = predictions[s] == labels[s].values[target_attribute] ? 1 : 0;
  }
  return build_report(groups, labels, correct);
}

EvalReport evaluate_groups(const std::vector<Group>& predictions,
                           const std::vector<Group>& labels,
                           const GroupSet& groups) {
  if (predictions.size() != labels.size()) {
    throw Error(Error::Code::kInvalidArgument,
                "prediction and label lists must have equal length");
  }
  std::vector<char> correct(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    correct[s] = predictions[s] == labels[s] ? 1 : 0;
  }
  return build_report(groups, labels, correct);
}

AgreementResult oracle_agreement(
    const std::vector<Eigen::VectorXd>& predictor_posteriors,
    const std::vector<Eigen::VectorXd>& bayes_posteriors) {
  if (predictor_posteriors.size() != bayes_posteriors.size() ||
      predictor_posteriors.empty()) {
    throw Error(Error::Code::kInvalidArgument,
                "posterior lists must have equal nonzero length");
  }
  AgreementResult result;
  double agree = 0.0;
  double tv = 0.0;
  for (std::size_t s = 0; s < predictor_posteriors.size(); ++s) {
    if (predictor_posteriors[s].size() != bayes_posteriors[s].size()) {
      throw Error(Error::Code::kSupportMismatch,
                  "posterior supports disagree");
    }
    agree += argmax(predictor_posteriors[s]) == argmax(bayes_posteriors[s]);
    tv += total_variation(predictor_posteriors[s], bayes_posteriors[s]);
  }
  result.argmax_agreement = agree / predictor_posteriors.size();
  result.mean_total_variation = tv / predictor_posteriors.size();
  return result;
}

}  // namespace crm
