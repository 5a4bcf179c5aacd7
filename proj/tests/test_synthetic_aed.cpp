#include <doctest.h>

#include <cmath>
#include <map>

#include "crm/rng.hpp"
#include "crm/synthetic_aed.hpp"
#include "crm/util.hpp"

using namespace crm;

TEST_CASE("orthogonal means are orthonormal") {
  const AttributeSpec spec({10, 10});
  const GaussianAedSpec aed = make_orthogonal_means(spec, 100, 3);
  REQUIRE(aed.means.rows() == 20);
  REQUIRE(aed.means.cols() == 100);
  for (int a = 0; a < 20; ++a) {
    CHECK(std::abs(aed.means.row(a).norm() - 1.0) <= 1e-10);
    for (int b = a + 1; b < 20; ++b) {
      CHECK(std::abs(aed.means.row(a).dot(aed.means.row(b))) <= 1e-10);
    }
  }
}

TEST_CASE("orthogonal means degenerate and error cases") {
  const GaussianAedSpec aed = make_orthogonal_means(AttributeSpec({1}), 1, 7);
  CHECK(std::abs(std::abs(aed.means(0, 0)) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(make_orthogonal_means(AttributeSpec({10, 10}), 19, 7), Error);
}

TEST_CASE("mean scale is applied and recorded") {
  const GaussianAedSpec aed =
      make_orthogonal_means(AttributeSpec({4, 4}), 16, 5, 3.0);
  CHECK(aed.mean_scale == 3.0);
  for (int r = 0; r < aed.means.rows(); ++r) {
    CHECK(aed.means.row(r).norm() == doctest::Approx(3.0).epsilon(1e-10));
  }
}

TEST_CASE("quadrant spec matches the 2d illustration") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  CHECK(aed.noise_variance() == doctest::Approx(1.0));

  const Eigen::VectorXd mean_pp = aed.group_mean(Group({1, 1}));
  CHECK(mean_pp[0] == doctest::Approx(1.0));
  CHECK(mean_pp[1] == doctest::Approx(1.0));
  const Eigen::VectorXd mean_mm = aed.group_mean(Group({0, 0}));
  CHECK(mean_mm[0] == doctest::Approx(-1.0));
  CHECK(mean_mm[1] == doctest::Approx(-1.0));

  // Unimodality: each group's density peaks at its own corner.
  for (std::int64_t idx = 0; idx < 4; ++idx) {
    const Group z = aed.attr.group_from_flat(idx);
    const Group opposite({1 - z.values[0], 1 - z.values[1]});
    const Eigen::VectorXd own = aed.group_mean(z);
    const Eigen::VectorXd other = aed.group_mean(opposite);
    CHECK(aed.log_conditional_density(own, z) >
          aed.log_conditional_density(other, z));
  }
}

TEST_CASE("additive energy factorization of the quadrant spec") {
  // log p(x|z) - log p(x|z') must equal <sigma(z') - sigma(z), E(x)> up to a
  // constant in x; comparing against the value at x = 0 cancels it.
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const Group z({1, 1});
  const Group zp({0, 1});
  const Eigen::VectorXd sig_diff =
      one_hot_encode(zp, aed.attr).entries - one_hot_encode(z, aed.attr).entries;

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const double base = (aed.log_conditional_density(zero, z) -
                       aed.log_conditional_density(zero, zp)) -
                      sig_diff.dot(aed.energy_vector(zero));

  Rng rng(11, "aed-factorization");
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(2);
    x << 4.0 * rng.next_gaussian(), 4.0 * rng.next_gaussian();
    const double lhs = aed.log_conditional_density(x, z) -
                       aed.log_conditional_density(x, zp);
    const double rhs = sig_diff.dot(aed.energy_vector(x)) + base;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("drop_group builds the compositional-shift scenario") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet full = enumerate_all_groups(aed.attr);
  const ShiftScenario scenario = drop_group(full, Group({0, 0}), aed.attr);
  CHECK(scenario.train_support.size() == 3);
  CHECK(scenario.test_support.size() == 4);
  CHECK_FALSE(scenario.train_support.contains(Group({0, 0})));
  CHECK(scenario.test_support.contains(Group({0, 0})));
  CHECK(scenario.train_prior.sum() == doctest::Approx(1.0));
  CHECK(is_compositional_shift(scenario, aed.attr));

  CHECK_THROWS_AS(drop_group(scenario.train_support, Group({0, 0}), aed.attr),
                  Error);
}

TEST_CASE("batch drop retains the requested support size") {
  const AttributeSpec spec({10, 10});
  const ShiftScenario scenario = random_retain_scenario(spec, 0.2, 9);
  CHECK(scenario.train_support.size() == 20);
  CHECK(scenario.test_support.size() == 100);
  for (const Group& g : scenario.train_support) {
    CHECK(scenario.test_support.contains(g));
  }
}

TEST_CASE("sampling matches the prior and the conditionals") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet full = enumerate_all_groups(aed.attr);
  const ShiftScenario scenario = drop_group(full, Group({0, 0}), aed.attr);
  const std::int64_t n = 100000;
  const Dataset data = sample_dataset(aed, true, scenario, n, 42);
  REQUIRE(data.size() == n);

  // Group frequencies: 3-sigma multinomial band around 1/3.
  std::map<std::vector<int>, std::int64_t> counts;
  for (const Group& g : data.labels) counts[g.values] += 1;
  CHECK(counts.size() == 3);
  const double p = 1.0 / 3.0;
  const double sigma3 = 3.0 * std::sqrt(p * (1.0 - p) * n);
  for (const auto& [values, count] : counts) {
    CHECK(std::abs(count - p * n) <= sigma3);
  }
  // The dropped group never appears.
  CHECK(counts.find(std::vector<int>{0, 0}) == counts.end());

  // Per-group sample means approach the conditional means.
  for (int k = 0; k < scenario.train_support.size(); ++k) {
    const Group& z = scenario.train_support.at(k);
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    std::int64_t n_group = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (data.labels[i] == z) {
        sum += data.features.row(i).transpose();
        ++n_group;
      }
    }
    const Eigen::VectorXd mean = aed.group_mean(z);
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(sum[c] / n_group - mean[c]) <=
            4.0 / std::sqrt(static_cast<double>(n_group)));
    }
  }
}

TEST_CASE("dataset generation is deterministic in the seed") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const ShiftScenario scenario =
      drop_group(enumerate_all_groups(aed.attr), Group({0, 0}), aed.attr);
  const Dataset a = sample_dataset(aed, true, scenario, 500, 7);
  const Dataset b = sample_dataset(aed, true, scenario, 500, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const Dataset c = sample_dataset(aed, false, scenario, 500, 7);
  CHECK(a.features != c.features);  // different purpose stream
}

TEST_CASE("bayes posterior normalization and argmax") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet full = enumerate_all_groups(aed.attr);
  const Eigen::VectorXd prior = uniform_prior(4);

  Rng rng(13, "bayes-normalization");
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(2);
    x << 3.0 * rng.next_gaussian(), 3.0 * rng.next_gaussian();
    const Eigen::VectorXd post = bayes_posterior(x, aed, full, prior);
    CHECK(std::abs(post.sum() - 1.0) <= 1e-12);
  }

  Eigen::VectorXd x(2);
  x << 2.0, 2.0;
  const Eigen::VectorXd post = bayes_posterior(x, aed, full, prior);
  CHECK(full.at(argmax(post)) == Group({1, 1}));

  // Equidistant point: uniform posterior.
  x << 0.0, 0.0;
  const Eigen::VectorXd center = bayes_posterior(x, aed, full, prior);
  for (int i = 0; i < 4; ++i) CHECK(center[i] == doctest::Approx(0.25));
}

TEST_CASE("bayes argmax on the three-group support") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet train({Group({1, 1}), Group({0, 1}), Group({1, 0})});
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  const Eigen::VectorXd post = bayes_posterior(x, aed, train, uniform_prior(3));
  CHECK(train.at(argmax(post)) == Group({1, 1}));
}

TEST_CASE("train and test share the generating spec") {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const ShiftScenario scenario =
      drop_group(enumerate_all_groups(aed.attr), Group({0, 0}), aed.attr);
  const Dataset train = sample_dataset(aed, true, scenario, 50, 3);
  const Dataset test = sample_dataset(aed, false, scenario, 50, 3);
  CHECK(train.source_spec_id == test.source_spec_id);
  CHECK(aed.content_hash() == make_2d_quadrant_spec().content_hash());
}
