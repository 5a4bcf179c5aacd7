#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "crm/evaluation.hpp"
#include "crm/rng.hpp"
#include "crm/util.hpp"

using namespace crm;

namespace {

const AttributeSpec kSpec({2, 2});

GroupSet full_grid() { return enumerate_all_groups(kSpec); }

}  // namespace

TEST_CASE("all-correct predictions score 1 on every metric") {
  const GroupSet groups = full_grid();
  std::vector<Group> labels;
  std::vector<int> predictions;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(groups.at(i % 4));
    predictions.push_back(labels.back().values[0]);
  }
  const EvalReport report = evaluate(predictions, labels, 0, groups);
  CHECK(report.average_acc == 1.0);
  CHECK(report.balanced_acc == 1.0);
  CHECK(report.worst_group_acc == 1.0);
}

TEST_CASE("two equal groups with accuracies 1 and 0") {
  GroupSet groups;
  groups.insert(Group({0, 0}));
  groups.insert(Group({1, 1}));
  std::vector<Group> labels;
  std::vector<int> predictions;
  for (int i = 0; i < 10; ++i) {
    labels.push_back(Group({0, 0}));
    predictions.push_back(0);  // correct
    labels.push_back(Group({1, 1}));
    predictions.push_back(0);  // wrong
  }
  const EvalReport report = evaluate(predictions, labels, 0, groups);
  CHECK(report.average_acc == doctest::Approx(0.5));
  CHECK(report.balanced_acc == doctest::Approx(0.5));
  CHECK(report.worst_group_acc == 0.0);
}

TEST_CASE("imbalanced groups separate average from balanced accuracy") {
  // Sizes (90, 10) with accuracies (1, 0): good average despite zero WGA.
  GroupSet groups;
  groups.insert(Group({0, 0}));
  groups.insert(Group({1, 1}));
  std::vector<Group> labels;
  std::vector<int> predictions;
  for (int i = 0; i < 90; ++i) {
    labels.push_back(Group({0, 0}));
    predictions.push_back(0);
  }
  for (int i = 0; i < 10; ++i) {
    labels.push_back(Group({1, 1}));
    predictions.push_back(0);
  }
  const EvalReport report = evaluate(predictions, labels, 0, groups);
  CHECK(report.average_acc == doctest::Approx(0.9));
  CHECK(report.balanced_acc == doctest::Approx(0.5));
  CHECK(report.worst_group_acc == 0.0);
}

TEST_CASE("zero-sample groups are flagged and excluded from the minimum") {
  const GroupSet groups = full_grid();
  std::vector<Group> labels = {Group({0, 0}), Group({0, 1})};
  std::vector<int> predictions = {0, 0};
  const EvalReport report = evaluate(predictions, labels, 0, groups);
  int empty_count = 0;
  for (const auto& g : report.per_group) empty_count += g.empty ? 1 : 0;
  CHECK(empty_count == 2);
  CHECK(report.worst_group_acc == 1.0);
}

TEST_CASE("metric identities on random prediction/label sets") {
  Rng rng(71, "metric-identities");
  for (int rep = 0; rep < 200; ++rep) {
    const GroupSet groups = full_grid();
    const int n = 1 + static_cast<int>(rng.next_below(60));
    std::vector<Group> labels;
    std::vector<int> predictions;
    for (int i = 0; i < n; ++i) {
      labels.push_back(groups.at(static_cast<int>(rng.next_below(4))));
      predictions.push_back(static_cast<int>(rng.next_below(2)));
    }
    const EvalReport report = evaluate(predictions, labels, 0, groups);

    // Recompute the triple directly.
    double correct = 0;
    for (int i = 0; i < n; ++i) {
      correct += predictions[i] == labels[i].values[0] ? 1 : 0;
    }
    CHECK(report.average_acc == doctest::Approx(correct / n));

    double balanced = 0.0;
    double worst = 1.0;
    int non_empty = 0;
    for (const auto& g : report.per_group) {
      if (g.empty) continue;
      double g_correct = 0;
      double g_total = 0;
      for (int i = 0; i < n; ++i) {
        if (labels[i] == g.group) {
          g_total += 1;
          g_correct += predictions[i] == labels[i].values[0] ? 1 : 0;
        }
      }
      const double acc = g_correct / g_total;
      CHECK(g.accuracy == doctest::Approx(acc));
      balanced += acc;
      worst = std::min(worst, acc);
      ++non_empty;
    }
    CHECK(report.balanced_acc == doctest::Approx(balanced / non_empty));
    CHECK(report.worst_group_acc == doctest::Approx(worst));
  }
}

TEST_CASE("evaluate is permutation invariant") {
  Rng rng(73, "permutation");
  const GroupSet groups = full_grid();
  const int n = 50;
  std::vector<Group> labels;
  std::vector<int> predictions;
  for (int i = 0; i < n; ++i) {
    labels.push_back(groups.at(static_cast<int>(rng.next_below(4))));
    predictions.push_back(static_cast<int>(rng.next_below(2)));
  }
  const EvalReport base = evaluate(predictions, labels, 0, groups);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.next_below(static_cast<std::uint64_t>(i + 1))]);
  }
  std::vector<Group> labels_p;
  std::vector<int> predictions_p;
  for (int i : perm) {
    labels_p.push_back(labels[i]);
    predictions_p.push_back(predictions[i]);
  }
  const EvalReport shuffled = evaluate(predictions_p, labels_p, 0, groups);
  CHECK(base.average_acc == shuffled.average_acc);
  CHECK(base.balanced_acc == shuffled.balanced_acc);
  CHECK(base.worst_group_acc == shuffled.worst_group_acc);
}

TEST_CASE("whole-group evaluation requires all attributes to match") {
  const GroupSet groups = full_grid();
  std::vector<Group> labels = {Group({0, 0}), Group({1, 1})};
  std::vector<Group> predictions = {Group({0, 1}), Group({1, 1})};
  const EvalReport report = evaluate_groups(predictions, labels, groups);
  CHECK(report.average_acc == doctest::Approx(0.5));
}

TEST_CASE("labels missing from the group list are an error") {
  GroupSet groups;
  groups.insert(Group({0, 0}));
  CHECK_THROWS_AS(evaluate({0}, {Group({1, 1})}, 0, groups), Error);
}

TEST_CASE("oracle agreement on identical and disjoint tables") {
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd p(3);
  p << 0.7, 0.2, 0.1;
  a.push_back(p);
  b.push_back(p);
  const AgreementResult same = oracle_agreement(a, b);
  CHECK(same.argmax_agreement == 1.0);
  CHECK(same.mean_total_variation == 0.0);

  Eigen::VectorXd q(3);
  q << 0.1, 0.2, 0.7;
  b[0] = q;
  const AgreementResult different = oracle_agreement(a, b);
  CHECK(different.argmax_agreement == 0.0);
  CHECK(different.mean_total_variation == doctest::Approx(0.6));

  b[0] = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(oracle_agreement(a, b), Error);
}

TEST_CASE("independent random argmaxes agree about 1/K of the time") {
  Rng rng(79, "random-agreement");
  const int k = 5;
  const int n = 20000;
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::VectorXd> b;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd pa = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd pb = Eigen::VectorXd::Zero(k);
    pa[rng.next_below(k)] = 1.0;
    pb[rng.next_below(k)] = 1.0;
    a.push_back(pa);
    b.push_back(pb);
  }
  const AgreementResult result = oracle_agreement(a, b);
  // 4-sigma band around 1/K.
  const double sigma = std::sqrt((1.0 / k) * (1.0 - 1.0 / k) / n);
  CHECK(std::abs(result.argmax_agreement - 1.0 / k) <= 4.0 * sigma);
}
