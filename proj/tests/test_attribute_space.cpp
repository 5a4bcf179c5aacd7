#include <doctest.h>

#include "crm/attribute_space.hpp"
#include "crm/rng.hpp"

using namespace crm;

TEST_CASE("one-hot encoding of the waterbirds example") {
  // Bird: WB=[1,0] -> index 0, LB -> 1. Background: W -> 0, L -> 1.
  const AttributeSpec spec({2, 2});
  const OneHotVector v = one_hot_encode(Group({0, 1}), spec);
  REQUIRE(v.entries.size() == 4);
  CHECK(v.entries[0] == 1.0);
  CHECK(v.entries[1] == 0.0);
  CHECK(v.entries[2] == 0.0);
  CHECK(v.entries[3] == 1.0);
}

TEST_CASE("one-hot encoding degenerate and heterogeneous cases") {
  const AttributeSpec trivial({1});
  CHECK(one_hot_encode(Group({0}), trivial).entries[0] == 1.0);

  const AttributeSpec mixed({2, 3, 2});
  const OneHotVector v = one_hot_encode(Group({1, 2, 0}), mixed);
  const std::vector<double> expected = {0, 1, 0, 0, 1, 1, 0};
  REQUIRE(v.entries.size() == 7);
  for (int i = 0; i < 7; ++i) CHECK(v.entries[i] == expected[i]);
  CHECK(decode(v, mixed) == Group({1, 2, 0}));
}

TEST_CASE("encoding rejects invalid groups") {
  const AttributeSpec spec({2, 2});
  CHECK_THROWS_AS(one_hot_encode(Group({0, 2}), spec), Error);
  CHECK_THROWS_AS(one_hot_encode(Group({0}), spec), Error);
}

TEST_CASE("decode inverts encode and rejects malformed vectors") {
  const AttributeSpec spec({2, 2});
  OneHotVector v;
  v.entries = Eigen::VectorXd::Zero(4);
  v.entries << 1, 0, 0, 1;
  CHECK(decode(v, spec) == Group({0, 1}));
  v.entries << 0, 1, 1, 0;
  CHECK(decode(v, spec) == Group({1, 0}));
  v.entries << 0.5, 0.5, 1, 0;
  CHECK_THROWS_AS(decode(v, spec), Error);
  v.entries << 1, 1, 1, 0;
  CHECK_THROWS_AS(decode(v, spec), Error);
}

TEST_CASE("encode/decode round-trip over random specs") {
  Rng rng(17, "roundtrip-spec");
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(rng.next_below(4));
    std::vector<int> cards;
    std::int64_t total = 1;
    for (int i = 0; i < m; ++i) {
      const int d = 1 + static_cast<int>(rng.next_below(9));
      cards.push_back(d);
      total *= d;
    }
    if (total > 10000) continue;
    const AttributeSpec spec(cards);
    REQUIRE(spec.total_groups() == total);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      const Group g = spec.group_from_flat(idx);
      CHECK(decode(one_hot_encode(g, spec), spec) == g);
      CHECK(spec.flat_index(g) == idx);
    }
  }
}

TEST_CASE("cartesian product of marginals") {
  const AttributeSpec d2({2, 2});
  const GroupSet diag({Group({0, 0}), Group({1, 1})});
  const GroupSet product = cartesian_product_of_marginals(diag, d2);
  CHECK(product.size() == 4);

  const GroupSet single({Group({0, 0})});
  CHECK(cartesian_product_of_marginals(single, d2).size() == 1);

  const AttributeSpec d3({3, 3});
  const GroupSet three({Group({0, 0}), Group({0, 1}), Group({1, 0})});
  const GroupSet expected(
      {Group({0, 0}), Group({0, 1}), Group({1, 0}), Group({1, 1})});
  CHECK(cartesian_product_of_marginals(three, d3).set_equals(expected));

  CHECK_THROWS_AS(cartesian_product_of_marginals(GroupSet(), d2), Error);
}

TEST_CASE("cartesian product size identity on random sets") {
  Rng rng(23, "product-size");
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> cards = {2 + static_cast<int>(rng.next_below(5)),
                              2 + static_cast<int>(rng.next_below(5)),
                              2 + static_cast<int>(rng.next_below(3))};
    const AttributeSpec spec(cards);
    GroupSet s;
    const int count = 1 + static_cast<int>(rng.next_below(10));
    for (int i = 0; i < count; ++i) {
      s.insert(spec.group_from_flat(static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(spec.total_groups())))));
    }
    const auto marginals = marginal_values(s, spec);
    std::int64_t expected = 1;
    for (const auto& values : marginals) {
      expected *= static_cast<std::int64_t>(values.size());
    }
    CHECK(cartesian_product_of_marginals(s, spec).size() == expected);
  }
}

TEST_CASE("group set preserves order, dedupes, and compares as a set") {
  GroupSet s;
  CHECK(s.insert(Group({1, 0})));
  CHECK(s.insert(Group({0, 0})));
  CHECK_FALSE(s.insert(Group({1, 0})));
  CHECK(s.size() == 2);
  CHECK(s.at(0) == Group({1, 0}));
  CHECK(s.contains(Group({0, 0})));
  CHECK(s.index_of(Group({0, 0})) == 1);
  CHECK(s.index_of(Group({1, 1})) == -1);

  const GroupSet reversed({Group({0, 0}), Group({1, 0})});
  CHECK(s.set_equals(reversed));
}

TEST_CASE("attribute spec validation") {
  CHECK_THROWS_AS(AttributeSpec(std::vector<int>{}), Error);
  CHECK_THROWS_AS(AttributeSpec({2, 0}), Error);
  const AttributeSpec spec({3, 4});
  CHECK(spec.total_onehot_len() == 7);
  CHECK(spec.total_groups() == 12);
  CHECK(spec.block_offset(1) == 3);
}
