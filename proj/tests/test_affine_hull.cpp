#include <doctest.h>

#include <cmath>

#include "crm/affine_hull.hpp"
#include "crm/rng.hpp"

using namespace crm;

namespace {

GroupSet random_group_set(const AttributeSpec& spec, int count, Rng& rng) {
  GroupSet s;
  while (s.size() < count) {
    s.insert(spec.group_from_flat(static_cast<std::int64_t>(
        rng.next_below(static_cast<std::uint64_t>(spec.total_groups())))));
  }
  return s;
}

}  // namespace

TEST_CASE("waterbirds affine identity") {
  // Train groups in the paper's order (LB,L), (LB,W), (WB,W) with encodings
  // [0,1,0,1], [0,1,1,0], [1,0,1,0]; the unseen (WB,L) = [1,0,0,1] is their
  // affine combination with coefficients (+1, -1, +1).
  const AttributeSpec spec({2, 2});
  const GroupSet train({Group({1, 1}), Group({1, 0}), Group({0, 0})});
  const Group candidate({0, 1});

  const auto result = in_affine_hull(candidate, train, spec);
  REQUIRE(result.is_member);
  REQUIRE(result.coefficients.has_value());
  CHECK(result.residual_norm <= 1e-9);

  const Eigen::VectorXd& alpha = *result.coefficients;
  CHECK(std::abs(alpha.sum() - 1.0) <= 1e-12);
  CHECK(alpha[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(alpha[1] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(alpha[2] == doctest::Approx(1.0).epsilon(1e-9));

  // Coefficients reconstruct the candidate encoding.
  Eigen::VectorXd recon = Eigen::VectorXd::Zero(spec.total_onehot_len());
  for (int j = 0; j < train.size(); ++j) {
    recon += alpha[j] * one_hot_encode(train.at(j), spec).entries;
  }
  CHECK((recon - one_hot_encode(candidate, spec).entries).norm() <= 1e-8);
}

TEST_CASE("membership of a training group is the indicator combination") {
  const AttributeSpec spec({3, 3});
  const GroupSet train({Group({0, 0}), Group({1, 2}), Group({2, 1})});
  const auto result = in_affine_hull(Group({1, 2}), train, spec);
  REQUIRE(result.is_member);
  CHECK(result.residual_norm <= 1e-10);
  CHECK((*result.coefficients)[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a diagonal pair does not span its row/column neighbors") {
  // One-parameter family a*sigma(0,0) + (1-a)*sigma(1,1) would need a=1 and
  // a=0 simultaneously to produce sigma(0,1).
  const AttributeSpec spec({3, 3});
  const GroupSet train({Group({0, 0}), Group({1, 1})});
  const auto result = in_affine_hull(Group({0, 1}), train, spec);
  CHECK_FALSE(result.is_member);
  CHECK(result.residual_norm > 0.1);
}

TEST_CASE("lemma: any 3 of the 4 groups of the 2x2 grid span all 4") {
  const AttributeSpec spec({2, 2});
  const GroupSet all = enumerate_all_groups(spec);
  for (int skip = 0; skip < 4; ++skip) {
    GroupSet train;
    for (int i = 0; i < 4; ++i) {
      if (i != skip) train.insert(all.at(i));
    }
    CHECK(enumerate_hull(train, spec).set_equals(all));
  }
  // No pair spans.
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const GroupSet pair({all.at(a), all.at(b)});
      CHECK(enumerate_hull(pair, spec).size() < 4);
    }
  }
}

TEST_CASE("hull of a single group is that group") {
  const AttributeSpec spec({3, 2});
  const GroupSet train({Group({2, 1})});
  const GroupSet hull = enumerate_hull(train, spec);
  CHECK(hull.size() == 1);
  CHECK(hull.contains(Group({2, 1})));
}

TEST_CASE("hull of a diagonal is the diagonal") {
  const AttributeSpec spec({3, 3});
  const GroupSet train({Group({0, 0}), Group({1, 1}), Group({2, 2})});
  CHECK(enumerate_hull(train, spec).set_equals(train));
}

TEST_CASE("hull monotonicity and idempotence") {
  Rng rng(41, "hull-props");
  for (int rep = 0; rep < 25; ++rep) {
    const AttributeSpec spec({2 + static_cast<int>(rng.next_below(3)),
                              2 + static_cast<int>(rng.next_below(3))});
    const int count =
        1 + static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(spec.total_groups())));
    const GroupSet train = random_group_set(spec, count, rng);
    const GroupSet hull = enumerate_hull(train, spec);
    CHECK(train.is_subset_of(hull));
    CHECK(enumerate_hull(hull, spec).set_equals(hull));
  }
}

TEST_CASE("enumeration cap errors out") {
  const AttributeSpec spec({100, 100, 100, 10});
  const GroupSet train({Group({0, 0, 0, 0})});
  CHECK_THROWS_AS(enumerate_hull(train, spec), Error);
}

TEST_CASE("connected components by Hamming-1 edges") {
  const GroupSet chain({Group({0, 0}), Group({0, 1}), Group({1, 0})});
  CHECK(connected_components(chain).size() == 1);

  const GroupSet apart({Group({0, 0}), Group({1, 1})});
  const auto parts = connected_components(apart);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 1);
  CHECK(parts[1].size() == 1);
}

TEST_CASE("6x6 layout splits into two components with subgrid hulls") {
  // Two blocks of observed groups, as in the hull-visualization figure: a
  // connected set over rows {0,1,2} x cols {0,1} and another over rows
  // {3,4} x cols {3,4,5}.
  const AttributeSpec spec({6, 6});
  GroupSet train;
  train.insert(Group({0, 0}));
  train.insert(Group({1, 0}));
  train.insert(Group({1, 1}));
  train.insert(Group({2, 1}));
  train.insert(Group({3, 3}));
  train.insert(Group({3, 4}));
  train.insert(Group({4, 4}));
  train.insert(Group({4, 5}));

  const auto parts = connected_components(train);
  REQUIRE(parts.size() == 2);

  const GroupSet hull = hull_via_components(train, spec);
  // 3x2 + 2x3 cells
  CHECK(hull.size() == 12);
  CHECK(hull.contains(Group({0, 1})));   // completed blue subgrid
  CHECK(hull.contains(Group({2, 0})));
  CHECK(hull.contains(Group({3, 5})));   // completed yellow subgrid
  CHECK(hull.contains(Group({4, 3})));
  CHECK_FALSE(hull.contains(Group({0, 3})));
  CHECK(hull.set_equals(enumerate_hull(train, spec)));
}

TEST_CASE("hull_via_components basic examples") {
  const AttributeSpec spec({2, 2});
  const GroupSet one_component(
      {Group({0, 0}), Group({0, 1}), Group({1, 1})});
  CHECK(hull_via_components(one_component, spec).size() == 4);

  const AttributeSpec d3({3, 3});
  const GroupSet diag({Group({0, 0}), Group({1, 1}), Group({2, 2})});
  CHECK(hull_via_components(diag, d3).set_equals(diag));

  CHECK_THROWS_AS(
      hull_via_components(GroupSet({Group({0, 0, 0})}), AttributeSpec({2, 2, 2})),
      Error);
}

TEST_CASE("component characterization equals brute force on random instances") {
  Rng rng(97, "component-equiv");
  for (int rep = 0; rep < 40; ++rep) {
    const AttributeSpec spec({1 + static_cast<int>(rng.next_below(8)),
                              1 + static_cast<int>(rng.next_below(8))});
    const int max_train = static_cast<int>(
        std::min<std::int64_t>(12, spec.total_groups()));
    const int count = 1 + static_cast<int>(rng.next_below(max_train));
    const GroupSet train = random_group_set(spec, count, rng);
    CHECK(hull_via_components(train, spec)
              .set_equals(enumerate_hull(train, spec)));
  }
}

TEST_CASE("deterministic spanning set") {
  SUBCASE("degenerate d=1") {
    const AttributeSpec spec({1, 1});
    const GroupSet b = deterministic_spanning_set(spec);
    CHECK(b.size() == 1);
    CHECK(enumerate_hull(b, spec).size() == 1);
  }
  SUBCASE("d=2 and d=3") {
    const AttributeSpec d2({2, 2});
    CHECK(deterministic_spanning_set(d2).size() == 3);
    CHECK(enumerate_hull(deterministic_spanning_set(d2), d2).size() == 4);

    const AttributeSpec d3({3, 3});
    const GroupSet b = deterministic_spanning_set(d3);
    CHECK(b.size() == 5);
    const GroupSet expected({Group({0, 0}), Group({0, 1}), Group({1, 0}),
                             Group({0, 2}), Group({2, 0})});
    CHECK(b.set_equals(expected));
    CHECK(enumerate_hull(b, d3).size() == 9);
  }
  SUBCASE("arity errors") {
    CHECK_THROWS_AS(deterministic_spanning_set(AttributeSpec({2, 3})), Error);
    CHECK_THROWS_AS(deterministic_spanning_set(AttributeSpec({2, 2, 2})), Error);
  }
}

TEST_CASE("rank criterion agrees with brute-force hull on every trial") {
  // Replay the documented per-trial stream and compare the incremental rank
  // with exact hull enumeration after every sample.
  const std::uint64_t seed = 2024;
  for (const auto& cards : {std::vector<int>{2, 2}, std::vector<int>{3, 2},
                            std::vector<int>{2, 2, 2}}) {
    const AttributeSpec spec(cards);
    const std::int64_t max_samples = 40;
    const HullGrowthCurve curve =
        simulate_hull_growth(spec, 5, seed, max_samples);
    for (const auto& trial : curve.trials) {
      Rng replay(seed, "hull-growth", trial.trial_index);
      GroupSet seen;
      int full_rank = 1;
      for (int d : cards) full_rank += d - 1;
      std::int64_t prev_hull_size = 0;
      for (std::size_t s = 0; s < trial.rank_after_sample.size(); ++s) {
        seen.insert(spec.group_from_flat(static_cast<std::int64_t>(
            replay.next_below(static_cast<std::uint64_t>(spec.total_groups())))));
        const GroupSet hull = enumerate_hull(seen, spec);
        CHECK(hull.size() >= prev_hull_size);
        prev_hull_size = hull.size();
        const bool brute_spans = hull.size() == spec.total_groups();
        const bool rank_spans = trial.rank_after_sample[s] == full_rank;
        CHECK(brute_spans == rank_spans);
      }
      if (trial.completed) {
        CHECK(prev_hull_size == spec.total_groups());
      }
    }
  }
}

TEST_CASE("growth simulation on the 2x2 grid matches the coupon oracle") {
  // Spanning needs 3 distinct of 4 groups: E = 4/4 + 4/3 + 4/2 = 13/3.
  const AttributeSpec spec({2, 2});
  const HullGrowthCurve curve = simulate_hull_growth(spec, 20000, 5, 200);
  CHECK(curve.completed_trials() == 20000);
  CHECK(curve.mean_samples_to_span() ==
        doctest::Approx(13.0 / 3.0).epsilon(0.03));
}

TEST_CASE("single-point grid spans with one sample") {
  const AttributeSpec spec({1, 1, 1});
  const HullGrowthCurve curve = simulate_hull_growth(spec, 10, 3, 5);
  for (const auto& trial : curve.trials) {
    CHECK(trial.completed);
    CHECK(trial.samples_to_span == 1);
  }
}

TEST_CASE("trials hitting max_samples are marked incomplete") {
  const AttributeSpec spec({4, 4});
  const HullGrowthCurve curve = simulate_hull_growth(spec, 50, 11, 3);
  CHECK(curve.completed_trials() == 0);
  CHECK(curve.fraction_incomplete_at(3) == 1.0);
}

TEST_CASE("parallel trials merge identically to sequential ones") {
  const AttributeSpec spec({3, 3});
  const HullGrowthCurve seq = simulate_hull_growth(spec, 64, 9, 100, 1);
  const HullGrowthCurve par = simulate_hull_growth(spec, 64, 9, 100, 4);
  REQUIRE(seq.trials.size() == par.trials.size());
  for (std::size_t t = 0; t < seq.trials.size(); ++t) {
    CHECK(seq.trials[t].samples_to_span == par.trials[t].samples_to_span);
    CHECK(seq.trials[t].rank_after_sample == par.trials[t].rank_after_sample);
  }
}
