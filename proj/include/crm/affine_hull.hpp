#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "crm/attribute_space.hpp"

namespace crm {

/// Outcome of an affine-hull membership test. When is_member, coefficients
/// holds one valid affine combination (indexed by the training groups in
/// their set order); coefficients are non-unique when the training encodings
/// are affinely dependent.
struct AffineMembershipResult {
  bool is_member = false;
  std::optional<Eigen::VectorXd> coefficients;
  double residual_norm = 0.0;
};

/// Residual threshold for membership. Encodings are 0/1 vectors, so residuals
/// are either numerical noise or order one.
constexpr double kMembershipTolerance = 1e-6;

constexpr std::int64_t kDefaultEnumerationCap = 1000000;

/// Tests whether candidate's one-hot encoding lies in the affine hull of the
/// training encodings: least squares on the encoding matrix with an appended
/// all-ones row (the sum-to-one constraint).
AffineMembershipResult in_affine_hull(const Group& candidate,
                                      const GroupSet& train,
                                      const AttributeSpec& spec,
                                      double tolerance = kMembershipTolerance);

/// All groups of the full grid whose encodings lie in the affine hull of
/// train. Throws when the grid exceeds the enumeration cap.
GroupSet enumerate_hull(const GroupSet& train, const AttributeSpec& spec,
                        std::int64_t enumeration_cap = kDefaultEnumerationCap);

/// Partition of train into maximal components connected by Hamming-distance-1
/// edges.
std::vector<GroupSet> connected_components(const GroupSet& train);

/// m=2 closed form: the hull is the union over connected components of the
/// Cartesian product of each component's per-attribute value sets.
GroupSet hull_via_components(const GroupSet& train, const AttributeSpec& spec);

/// The 2d-1 point construction {(0,0),(0,1),(1,0)} plus {(0,i+1),(i+1,0)},
/// whose hull is the full d x d grid. Requires m=2 with uniform cardinality.
GroupSet deterministic_spanning_set(const AttributeSpec& spec);

/// Incremental affine-rank tracker over one-hot encodings. A new encoding
/// raises the rank iff it lies outside the current affine span. Full span of
/// the grid is reached at rank sum_i (d_i - 1) + 1.
class AffineRankTracker {
 public:
  explicit AffineRankTracker(const AttributeSpec& spec);

  /// Returns true if the encoding increased the affine rank.
  bool add(const Eigen::VectorXd& encoding);

  int rank() const { return rank_; }
  int full_rank() const { return full_rank_; }
  bool spans_grid() const { return rank_ == full_rank_; }

 private:
  int dim_;
  int full_rank_;
  int rank_ = 0;
  Eigen::VectorXd base_point_;
  Eigen::MatrixXd basis_;  // orthonormal columns spanning directions
};

struct HullGrowthTrial {
  std::uint64_t trial_index = 0;
  /// rank_after_sample[s] is the affine rank after s+1 samples.
  std::vector<int> rank_after_sample;
  bool completed = false;
  /// Number of samples drawn when the hull first spanned the grid
  /// (counting duplicates); meaningful only when completed.
  std::int64_t samples_to_span = 0;
};

struct HullGrowthCurve {
  AttributeSpec spec;
  std::vector<HullGrowthTrial> trials;
  std::uint64_t seed = 0;
  std::int64_t max_samples = 0;

  int completed_trials() const;
  double mean_samples_to_span() const;
  double quantile_samples_to_span(double q) const;
  /// Fraction of trials that had not spanned the grid after `samples` draws.
  double fraction_incomplete_at(std::int64_t samples) const;
};

/// Samples groups i.i.d. uniformly (with replacement) from the full grid and
/// tracks the affine rank after each draw. A trial ends when the hull spans
/// the grid or max_samples is reached. Trials run on independent RNG streams
/// derived from (seed, trial index) and may execute in parallel; results are
/// merged in trial order.
HullGrowthCurve simulate_hull_growth(const AttributeSpec& spec,
                                     std::int64_t trials, std::uint64_t seed,
                                     std::int64_t max_samples,
                                     int threads = 1);

}  // namespace crm
