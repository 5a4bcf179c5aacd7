#include "crm/attribute_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace crm {

AttributeSpec::AttributeSpec(std::vector<int> cardinalities)
    : cardinalities_(std::move(cardinalities)) {
  if (cardinalities_.empty()) {
    throw Error(Error::Code::kInvalidArgument,
                "attribute spec needs at least one attribute");
  }
  total_groups_ = 1;
  for (int d : cardinalities_) {
    if (d < 1) {
      throw Error(Error::Code::kInvalidArgument,
                  "attribute cardinalities must be >= 1");
    }
    block_offsets_.push_back(total_onehot_len_);
    total_onehot_len_ += d;
    total_groups_ *= d;
  }
}

bool AttributeSpec::is_valid(const Group& g) const {
  if (g.size() != num_attributes()) return false;
  for (int i = 0; i < g.size(); ++i) {
    if (g.values[i] < 0 || g.values[i] >= cardinalities_[i]) return false;
  }
  return true;
}

void AttributeSpec::require_valid(const Group& g) const {
  if (!is_valid(g)) {
    throw Error(Error::Code::kInvalidGroup,
                "group " + to_string(g) + " is not valid under the spec");
  }
}

std::int64_t AttributeSpec::flat_index(const Group& g) const {
  require_valid(g);
  std::int64_t index = 0;
  for (int i = 0; i < num_attributes(); ++i) {
    index = index * cardinalities_[i] + g.values[i];
  }
  return index;
}

Group AttributeSpec::group_from_flat(std::int64_t index) const {
  if (index < 0 || index >= total_groups_) {
    throw Error(Error::Code::kInvalidGroup, "flat group index out of range");
  }
  std::vector<int> values(num_attributes());
  for (int i = num_attributes() - 1; i >= 0; --i) {
    values[i] = static_cast<int>(index % cardinalities_[i]);
    index /= cardinalities_[i];
  }
  return Group(std::move(values));
}

GroupSet::GroupSet(const std::vector<Group>& groups) {
  for (const Group& g : groups) insert(g);
}

bool GroupSet::insert(const Group& g) {
  if (lookup_.count(g)) return false;
  lookup_.insert(g);
  members_.push_back(g);
  return true;
}

int GroupSet::index_of(const Group& g) const {
  if (!contains(g)) return -1;
  auto it = std::find(members_.begin(), members_.end(), g);
  return static_cast<int>(it - members_.begin());
}

bool GroupSet::set_equals(const GroupSet& other) const {
  if (size() != other.size()) return false;
  return is_subset_of(other);
}

bool GroupSet::is_subset_of(const GroupSet& other) const {
  for (const Group& g : members_) {
    if (!other.contains(g)) return false;
  }
  return true;
}

GroupSet GroupSet::sorted(const AttributeSpec& spec) const {
  std::vector<Group> copy = members_;
  std::sort(copy.begin(), copy.end(),
            [&spec](const Group& a, const Group& b) {
              return spec.flat_index(a) < spec.flat_index(b);
            });
  return GroupSet(copy);
}

OneHotVector one_hot_encode(const Group& z, const AttributeSpec& spec) {
  spec.require_valid(z);
  OneHotVector v;
  v.entries = Eigen::VectorXd::Zero(spec.total_onehot_len());
  for (int i = 0; i < spec.num_attributes(); ++i) {
    v.entries[spec.block_offset(i) + z.values[i]] = 1.0;
  }
  return v;
}

Group decode(const OneHotVector& v, const AttributeSpec& spec) {
  constexpr double kTol = 1e-12;
  if (v.entries.size() != spec.total_onehot_len()) {
    throw Error(Error::Code::kDecodeFailure,
                "one-hot vector length does not match the spec");
  }
  std::vector<int> values(spec.num_attributes(), -1);
  for (int i = 0; i < spec.num_attributes(); ++i) {
    const int offset = spec.block_offset(i);
    for (int k = 0; k < spec.cardinality(i); ++k) {
      const double e = v.entries[offset + k];
      if (std::abs(e - 1.0) <= kTol) {
        if (values[i] != -1) {
          throw Error(Error::Code::kDecodeFailure,
                      "one-hot block has more than one entry equal to 1");
        }
        values[i] = k;
      } else if (std::abs(e) > kTol) {
        throw Error(Error::Code::kDecodeFailure,
                    "one-hot entry is neither 0 nor 1");
      }
    }
    if (values[i] == -1) {
      throw Error(Error::Code::kDecodeFailure,
                  "one-hot block has no entry equal to 1");
    }
  }
  return Group(std::move(values));
}

std::vector<std::vector<int>> marginal_values(const GroupSet& s,
                                              const AttributeSpec& spec) {
  std::vector<std::set<int>> seen(spec.num_attributes());
  for (const Group& g : s) {
    spec.require_valid(g);
    for (int i = 0; i < spec.num_attributes(); ++i) {
      seen[i].insert(g.values[i]);
    }
  }
  std::vector<std::vector<int>> result;
  result.reserve(seen.size());
  for (const auto& values : seen) {
    result.emplace_back(values.begin(), values.end());
  }
  return result;
}

GroupSet cartesian_product_of_marginals(const GroupSet& s,
                                        const AttributeSpec& spec) {
  if (s.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "cannot take marginals of an empty group set");
  }
  const auto marginals = marginal_values(s, spec);
  GroupSet product;
  std::vector<std::size_t> cursor(marginals.size(), 0);
  for (;;) {
    std::vector<int> values(marginals.size());
    for (std::size_t i = 0; i < marginals.size(); ++i) {
      values[i] = marginals[i][cursor[i]];
    }
    product.insert(Group(std::move(values)));
    int i = static_cast<int>(marginals.size()) - 1;
    while (i >= 0 && ++cursor[i] == marginals[i].size()) {
      cursor[i] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return product;
}

GroupSet enumerate_all_groups(const AttributeSpec& spec) {
  GroupSet all;
  for (std::int64_t idx = 0; idx < spec.total_groups(); ++idx) {
    all.insert(spec.group_from_flat(idx));
  }
  return all;
}

std::string to_string(const Group& g) {
  std::ostringstream out;
  out << "(";
  for (int i = 0; i < g.size(); ++i) {
    if (i > 0) out << ",";
    out << g.values[i];
  }
  out << ")";
  return out.str();
}

}  // namespace crm
