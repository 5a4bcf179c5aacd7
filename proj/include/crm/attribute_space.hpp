#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

#include "crm/error.hpp"

namespace crm {

class AttributeSpec;

/// One attribute combination z = (z_1, ..., z_m), 0-based indices.
struct Group {
  std::vector<int> values;

  Group() = default;
  explicit Group(std::vector<int> v) : values(std::move(v)) {}

  bool operator==(const Group& other) const { return values == other.values; }
  bool operator!=(const Group& other) const { return values != other.values; }
  bool operator<(const Group& other) const { return values < other.values; }

  int size() const { return static_cast<int>(values.size()); }
};

struct GroupHash {
  std::size_t operator()(const Group& g) const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (int v : g.values) {
      h ^= static_cast<std::uint64_t>(v) + 0x9E3779B97F4A7C15ull;
      h *= 0x100000001B3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// The categorical product space: m attributes with cardinalities d_1..d_m.
/// Immutable after construction.
class AttributeSpec {
 public:
  AttributeSpec() = default;
  explicit AttributeSpec(std::vector<int> cardinalities);

  int num_attributes() const { return static_cast<int>(cardinalities_.size()); }
  int cardinality(int attribute) const { return cardinalities_.at(attribute); }
  const std::vector<int>& cardinalities() const { return cardinalities_; }

  /// Sum of cardinalities: length of the concatenated one-hot encoding.
  int total_onehot_len() const { return total_onehot_len_; }

  /// Product of cardinalities: number of distinct groups.
  std::int64_t total_groups() const { return total_groups_; }

  /// Start of attribute i's block inside the one-hot vector.
  int block_offset(int attribute) const { return block_offsets_.at(attribute); }

  bool is_valid(const Group& g) const;
  void require_valid(const Group& g) const;

  /// Mixed-radix packing of a group into [0, total_groups).
  std::int64_t flat_index(const Group& g) const;
  Group group_from_flat(std::int64_t index) const;

  bool operator==(const AttributeSpec& other) const {
    return cardinalities_ == other.cardinalities_;
  }

 private:
  std::vector<int> cardinalities_;
  std::vector<int> block_offsets_;
  int total_onehot_len_ = 0;
  std::int64_t total_groups_ = 0;
};

/// Concatenation of m one-hot blocks; dense because it feeds dot products
/// with energy vectors.
struct OneHotVector {
  Eigen::VectorXd entries;
};

/// Ordered, duplicate-free collection of groups with O(1) membership.
class GroupSet {
 public:
  GroupSet() = default;
  explicit GroupSet(const std::vector<Group>& groups);

  /// Returns true if the group was inserted (false on duplicate).
  bool insert(const Group& g);

  bool contains(const Group& g) const { return lookup_.count(g) > 0; }
  bool empty() const { return members_.empty(); }
  int size() const { return static_cast<int>(members_.size()); }

  const std::vector<Group>& members() const { return members_; }
  const Group& at(int i) const { return members_.at(i); }

  /// Position of g in insertion order, or -1.
  int index_of(const Group& g) const;

  /// Set equality, ignoring insertion order.
  bool set_equals(const GroupSet& other) const;

  bool is_subset_of(const GroupSet& other) const;

  /// Members reordered by flat index under the given spec.
  GroupSet sorted(const AttributeSpec& spec) const;

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

 private:
  std::vector<Group> members_;
  std::unordered_set<Group, GroupHash> lookup_;
};

OneHotVector one_hot_encode(const Group& z, const AttributeSpec& spec);

/// Inverse of one_hot_encode. Each block must contain exactly one entry equal
/// to 1 (tolerance 1e-12) and zeros elsewhere, otherwise a decode error.
Group decode(const OneHotVector& v, const AttributeSpec& spec);

/// Z^x: the Cartesian product of the per-attribute value sets occurring in s.
GroupSet cartesian_product_of_marginals(const GroupSet& s,
                                        const AttributeSpec& spec);

/// Per-attribute value sets occurring in s (sorted ascending).
std::vector<std::vector<int>> marginal_values(const GroupSet& s,
                                              const AttributeSpec& spec);

/// All Pi d_i groups in flat-index order.
GroupSet enumerate_all_groups(const AttributeSpec& spec);

std::string to_string(const Group& g);

}  // namespace crm
