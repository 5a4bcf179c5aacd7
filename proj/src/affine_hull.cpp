#include "crm/affine_hull.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <queue>

#include "crm/rng.hpp"

namespace crm {

namespace {

/// Encoding matrix with the appended all-ones row; columns follow the set
/// order of `train`.
Eigen::MatrixXd augmented_encoding_matrix(const GroupSet& train,
                                          const AttributeSpec& spec) {
  const int rows = spec.total_onehot_len() + 1;
  Eigen::MatrixXd a(rows, train.size());
  for (int j = 0; j < train.size(); ++j) {
    a.col(j).head(rows - 1) = one_hot_encode(train.at(j), spec).entries;
    a(rows - 1, j) = 1.0;
  }
  return a;
}

Eigen::VectorXd augmented_target(const Group& candidate,
                                 const AttributeSpec& spec) {
  const int rows = spec.total_onehot_len() + 1;
  Eigen::VectorXd b(rows);
  b.head(rows - 1) = one_hot_encode(candidate, spec).entries;
  b(rows - 1) = 1.0;
  return b;
}

int hamming_distance(const Group& a, const Group& b) {
  int dist = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] != b.values[i]) ++dist;
  }
  return dist;
}

}  // namespace

AffineMembershipResult in_affine_hull(const Group& candidate,
                                      const GroupSet& train,
                                      const AttributeSpec& spec,
                                      double tolerance) {
  if (train.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "affine hull of an empty set is empty");
  }
  spec.require_valid(candidate);

  const Eigen::MatrixXd a = augmented_encoding_matrix(train, spec);
  const Eigen::VectorXd b = augmented_target(candidate, spec);
  // Rank-revealing factorization; tolerates duplicate or affinely dependent
  // training columns and returns the minimum-norm coefficient vector then.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd alpha = cod.solve(b);

  AffineMembershipResult result;
  result.residual_norm = (a * alpha - b).norm();
  result.is_member = result.residual_norm <= tolerance;
  if (result.is_member) result.coefficients = alpha;
  return result;
}

GroupSet enumerate_hull(const GroupSet& train, const AttributeSpec& spec,
                        std::int64_t enumeration_cap) {
  if (train.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "affine hull of an empty set is empty");
  }
  if (spec.total_groups() > enumeration_cap) {
    throw Error(Error::Code::kEnumerationTooLarge,
                "grid too large to enumerate; for m=2 use hull_via_components");
  }
  const Eigen::MatrixXd a = augmented_encoding_matrix(train, spec);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);

  GroupSet hull;
  for (std::int64_t idx = 0; idx < spec.total_groups(); ++idx) {
    const Group candidate = spec.group_from_flat(idx);
    const Eigen::VectorXd b = augmented_target(candidate, spec);
    const Eigen::VectorXd alpha = cod.solve(b);
    if ((a * alpha - b).norm() <= kMembershipTolerance) {
      hull.insert(candidate);
    }
  }
  return hull;
}

std::vector<GroupSet> connected_components(const GroupSet& train) {
  if (train.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "cannot partition an empty group set");
  }
  const int n = train.size();
  std::vector<bool> visited(n, false);
  std::vector<GroupSet> components;
  for (int start = 0; start < n; ++start) {
    if (visited[start]) continue;
    GroupSet component;
    std::queue<int> frontier;
    frontier.push(start);
    visited[start] = true;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      component.insert(train.at(u));
      for (int v = 0; v < n; ++v) {
        if (!visited[v] && hamming_distance(train.at(u), train.at(v)) == 1) {
          visited[v] = true;
          frontier.push(v);
        }
      }
    }
    components.push_back(std::move(component));
  }
  return components;
}

GroupSet hull_via_components(const GroupSet& train, const AttributeSpec& spec) {
  if (spec.num_attributes() != 2) {
    throw Error(Error::Code::kUnsupportedArity,
                "the component characterization of the hull holds for m=2");
  }
  GroupSet hull;
  for (const GroupSet& component : connected_components(train)) {
    const auto values = marginal_values(component, spec);
    for (int v0 : values[0]) {
      for (int v1 : values[1]) {
        hull.insert(Group({v0, v1}));
      }
    }
  }
  return hull.sorted(spec);
}

GroupSet deterministic_spanning_set(const AttributeSpec& spec) {
  if (spec.num_attributes() != 2 ||
      spec.cardinality(0) != spec.cardinality(1)) {
    throw Error(Error::Code::kUnsupportedArity,
                "the 2d-1 construction needs m=2 with uniform cardinality");
  }
  const int d = spec.cardinality(0);
  GroupSet points;
  points.insert(Group({0, 0}));
  if (d >= 2) {
    points.insert(Group({0, 1}));
    points.insert(Group({1, 0}));
    for (int i = 1; i <= d - 2; ++i) {
      points.insert(Group({0, i + 1}));
      points.insert(Group({i + 1, 0}));
    }
  }
  return points;
}

AffineRankTracker::AffineRankTracker(const AttributeSpec& spec)
    : dim_(spec.total_onehot_len()) {
  full_rank_ = 1;
  for (int d : spec.cardinalities()) full_rank_ += d - 1;
  basis_.resize(dim_, full_rank_ - 1);
}

bool AffineRankTracker::add(const Eigen::VectorXd& encoding) {
  if (rank_ == 0) {
    base_point_ = encoding;
    rank_ = 1;
    return true;
  }
  if (rank_ == full_rank_) return false;
  Eigen::VectorXd w = encoding - base_point_;
  const double scale = std::max(1.0, w.norm());
  // Two Gram-Schmidt passes keep the basis orthonormal to machine precision.
  const auto basis = basis_.leftCols(rank_ - 1);
  w -= basis * (basis.transpose() * w);
  w -= basis * (basis.transpose() * w);
  if (w.norm() <= 1e-8 * scale) return false;
  basis_.col(rank_ - 1) = w / w.norm();
  ++rank_;
  return true;
}

namespace {

HullGrowthTrial run_growth_trial(const AttributeSpec& spec,
                                 std::uint64_t trial_index, std::uint64_t seed,
                                 std::int64_t max_samples) {
  HullGrowthTrial trial;
  trial.trial_index = trial_index;
  Rng rng(seed, "hull-growth", trial_index);
  AffineRankTracker tracker(spec);
  const std::uint64_t total =
      static_cast<std::uint64_t>(spec.total_groups());
  for (std::int64_t s = 1; s <= max_samples; ++s) {
    const Group g = spec.group_from_flat(
        static_cast<std::int64_t>(rng.next_below(total)));
    tracker.add(one_hot_encode(g, spec).entries);
    trial.rank_after_sample.push_back(tracker.rank());
    if (tracker.spans_grid()) {
      trial.completed = true;
      trial.samples_to_span = s;
      break;
    }
  }
  return trial;
}

}  // namespace

HullGrowthCurve simulate_hull_growth(const AttributeSpec& spec,
                                     std::int64_t trials, std::uint64_t seed,
                                     std::int64_t max_samples, int threads) {
  if (spec.total_groups() > kDefaultEnumerationCap) {
    throw Error(Error::Code::kEnumerationTooLarge,
                "grid too large for growth simulation");
  }
  if (trials < 1 || max_samples < 1) {
    throw Error(Error::Code::kInvalidArgument,
                "need at least one trial and one sample");
  }
  HullGrowthCurve curve;
  curve.spec = spec;
  curve.seed = seed;
  curve.max_samples = max_samples;
  curve.trials.resize(trials);

  if (threads <= 1) {
    for (std::int64_t t = 0; t < trials; ++t) {
      curve.trials[t] = run_growth_trial(spec, t, seed, max_samples);
    }
    return curve;
  }

  std::vector<std::future<void>> workers;
  const std::int64_t chunk = (trials + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min(trials, begin + chunk);
    if (begin >= end) break;
    workers.push_back(std::async(std::launch::async, [&, begin, end]() {
      for (std::int64_t t = begin; t < end; ++t) {
        curve.trials[t] = run_growth_trial(spec, t, seed, max_samples);
      }
    }));
  }
  for (auto& worker : workers) worker.get();
  return curve;
}

int HullGrowthCurve::completed_trials() const {
  int n = 0;
  for (const auto& t : trials) n += t.completed ? 1 : 0;
  return n;
}

double HullGrowthCurve::mean_samples_to_span() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& t : trials) {
    if (t.completed) {
      sum += static_cast<double>(t.samples_to_span);
      ++n;
    }
  }
  return n > 0 ? sum / n : std::nan("");
}

double HullGrowthCurve::quantile_samples_to_span(double q) const {
  std::vector<std::int64_t> spans;
  for (const auto& t : trials) {
    if (t.completed) spans.push_back(t.samples_to_span);
  }
  if (spans.empty()) return std::nan("");
  std::sort(spans.begin(), spans.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(spans.size())));
  const std::size_t idx = rank == 0 ? 0 : rank - 1;
  return static_cast<double>(spans[std::min(idx, spans.size() - 1)]);
}

double HullGrowthCurve::fraction_incomplete_at(std::int64_t samples) const {
  if (trials.empty()) return std::nan("");
  std::int64_t incomplete = 0;
  for (const auto& t : trials) {
    if (!t.completed || t.samples_to_span > samples) ++incomplete;
  }
  return static_cast<double>(incomplete) / static_cast<double>(trials.size());
}

}  // namespace crm
