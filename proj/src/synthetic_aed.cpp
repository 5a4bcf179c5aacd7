#include "crm/synthetic_aed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crm/rng.hpp"
#include "crm/util.hpp"

namespace crm {

Eigen::VectorXd GaussianAedSpec::mean_for(int attribute, int value) const {
  return means.row(attr.block_offset(attribute) + value).transpose();
}

Eigen::VectorXd GaussianAedSpec::group_mean(const Group& z) const {
  attr.require_valid(z);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ambient_dim);
  for (int i = 0; i < attr.num_attributes(); ++i) {
    mean += means.row(attr.block_offset(i) + z.values[i]).transpose();
  }
  return mean / attr.num_attributes();
}

double GaussianAedSpec::noise_variance() const {
  return 1.0 / (2.0 * energy_scale * attr.num_attributes());
}

double GaussianAedSpec::log_conditional_density(const Eigen::VectorXd& x,
                                                const Group& z) const {
  const double var = noise_variance();
  const double sq = (x - group_mean(z)).squaredNorm();
  return -0.5 * sq / var - 0.5 * ambient_dim * std::log(2.0 * M_PI * var);
}

Eigen::VectorXd GaussianAedSpec::energy_vector(const Eigen::VectorXd& x) const {
  Eigen::VectorXd e(attr.total_onehot_len());
  for (int row = 0; row < attr.total_onehot_len(); ++row) {
    e[row] = energy_scale * (x - means.row(row).transpose()).squaredNorm();
  }
  return e;
}

std::uint64_t GaussianAedSpec::content_hash() const {
  std::ostringstream blob;
  for (int d : attr.cardinalities()) blob << d << ",";
  blob << "|" << ambient_dim << "|" << energy_scale << "|" << mean_scale << "|";
  blob.precision(17);
  for (int r = 0; r < means.rows(); ++r) {
    for (int c = 0; c < means.cols(); ++c) blob << means(r, c) << ",";
  }
  return fnv1a64(blob.str());
}

bool is_compositional_shift(const ShiftScenario& scenario,
                            const AttributeSpec& spec) {
  if (scenario.train_support.empty()) return false;
  const GroupSet product =
      cartesian_product_of_marginals(scenario.train_support, spec);
  return scenario.test_support.is_subset_of(product);
}

GaussianAedSpec make_orthogonal_means(const AttributeSpec& spec,
                                      int ambient_dim, std::uint64_t seed,
                                      double scale) {
  const int rows = spec.total_onehot_len();
  if (ambient_dim < rows) {
    throw Error(Error::Code::kDimensionTooSmall,
                "ambient dimension must be at least sum of cardinalities");
  }
  Rng rng(seed, "orthogonal-means");
  Eigen::MatrixXd gaussian(ambient_dim, rows);
  for (int c = 0; c < rows; ++c) {
    for (int r = 0; r < ambient_dim; ++r) gaussian(r, c) = rng.next_gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim, rows);

  GaussianAedSpec aed;
  aed.attr = spec;
  aed.ambient_dim = ambient_dim;
  aed.means = scale * q.transpose();
  aed.energy_scale = 1.0;
  aed.mean_scale = scale;
  std::ostringstream id;
  id << "orthogonal-means-seed" << seed << "-n" << ambient_dim << "-scale"
     << scale;
  aed.spec_id = id.str();
  return aed;
}

GaussianAedSpec make_2d_quadrant_spec() {
  GaussianAedSpec aed;
  aed.attr = AttributeSpec({2, 2});
  aed.ambient_dim = 2;
  aed.means.resize(4, 2);
  // E(x,(z1,z2)) = 1/4 ||x-(2 z1,0)||^2 + 1/4 ||x-(0,2 z2)||^2 with
  // z_i in {-1,+1}: value index 0 -> -1, index 1 -> +1. The induced
  // conditional is N((z1, z2), I).
  aed.means.row(0) << -2.0, 0.0;
  aed.means.row(1) << 2.0, 0.0;
  aed.means.row(2) << 0.0, -2.0;
  aed.means.row(3) << 0.0, 2.0;
  aed.energy_scale = 0.25;
  aed.mean_scale = 2.0;
  aed.spec_id = "quadrant2d";
  return aed;
}

ShiftScenario drop_group(const GroupSet& full_support, const Group& dropped,
                         const AttributeSpec& spec) {
  GroupSet dropped_set;
  dropped_set.insert(dropped);
  return drop_groups(full_support, dropped_set, spec);
}

ShiftScenario drop_groups(const GroupSet& full_support,
                          const GroupSet& dropped, const AttributeSpec& spec) {
  for (const Group& g : dropped) {
    if (!full_support.contains(g)) {
      throw Error(Error::Code::kInvalidGroup,
                  "dropped group " + to_string(g) + " not in the support");
    }
  }
  ShiftScenario scenario;
  scenario.attr = spec;
  for (const Group& g : full_support) {
    spec.require_valid(g);
    scenario.test_support.insert(g);
    if (!dropped.contains(g)) scenario.train_support.insert(g);
  }
  if (scenario.train_support.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "dropping all groups leaves an empty train support");
  }
  scenario.train_prior = uniform_prior(scenario.train_support.size());
  scenario.test_prior = uniform_prior(scenario.test_support.size());
  return scenario;
}

ShiftScenario random_retain_scenario(const AttributeSpec& spec,
                                     double retained_fraction,
                                     std::uint64_t seed) {
  if (retained_fraction <= 0.0 || retained_fraction > 1.0) {
    throw Error(Error::Code::kInvalidArgument,
                "retained fraction must lie in (0, 1]");
  }
  const std::int64_t total = spec.total_groups();
  const auto keep = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(retained_fraction * total)));

  std::vector<std::int64_t> indices(total);
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(seed, "retain-groups");
  for (std::int64_t i = total - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(
        rng.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(indices[i], indices[j]);
  }

  ShiftScenario scenario;
  scenario.attr = spec;
  std::vector<std::int64_t> retained(indices.begin(), indices.begin() + keep);
  std::sort(retained.begin(), retained.end());
  for (std::int64_t idx : retained) {
    scenario.train_support.insert(spec.group_from_flat(idx));
  }
  scenario.test_support = enumerate_all_groups(spec);
  scenario.train_prior = uniform_prior(scenario.train_support.size());
  scenario.test_prior = uniform_prior(scenario.test_support.size());
  return scenario;
}

Dataset sample_dataset(const GaussianAedSpec& aed, bool train_side,
                       const ShiftScenario& scenario, std::int64_t n_samples,
                       std::uint64_t seed) {
  if (n_samples < 1) {
    throw Error(Error::Code::kInvalidArgument, "need at least one sample");
  }
  const GroupSet& support = scenario.support(train_side);
  const Eigen::VectorXd& prior = scenario.prior(train_side);
  if (support.empty() || prior.size() != support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "scenario prior does not match its support");
  }
  if (std::abs(prior.sum() - 1.0) > 1e-9 || prior.minCoeff() < 0.0) {
    throw Error(Error::Code::kInvalidArgument,
                "prior must be a probability vector");
  }

  Eigen::VectorXd cdf(prior.size());
  std::partial_sum(prior.data(), prior.data() + prior.size(), cdf.data());

  Rng rng(seed, train_side ? "sample-train" : "sample-test");
  const double sigma = std::sqrt(aed.noise_variance());

  Dataset data;
  data.features.resize(n_samples, aed.ambient_dim);
  data.labels.reserve(n_samples);
  data.source_spec_id = aed.spec_id;
  data.seed = seed;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    const double u = rng.next_double();
    int g = static_cast<int>(
        std::lower_bound(cdf.data(), cdf.data() + cdf.size(), u) - cdf.data());
    g = std::min(g, static_cast<int>(prior.size()) - 1);
    const Group& z = support.at(g);
    const Eigen::VectorXd mean = aed.group_mean(z);
    for (int c = 0; c < aed.ambient_dim; ++c) {
      data.features(s, c) = mean[c] + sigma * rng.next_gaussian();
    }
    data.labels.push_back(z);
  }
  return data;
}

Eigen::VectorXd bayes_posterior(const Eigen::VectorXd& x,
                                const GaussianAedSpec& aed,
                                const GroupSet& support,
                                const Eigen::VectorXd& prior) {
  if (support.empty() || prior.size() != support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "prior does not match the support");
  }
  const double var = aed.noise_variance();
  Eigen::VectorXd log_weights(support.size());
  for (int i = 0; i < support.size(); ++i) {
    const double sq = (x - aed.group_mean(support.at(i))).squaredNorm();
    log_weights[i] =
        (prior[i] > 0.0 ? std::log(prior[i])
                        : -std::numeric_limits<double>::infinity()) -
        0.5 * sq / var;
  }
  return softmax(log_weights);
}

Eigen::VectorXd uniform_prior(int support_size) {
  if (support_size < 1) {
    throw Error(Error::Code::kEmptySupport, "empty support has no prior");
  }
  return Eigen::VectorXd::Constant(support_size, 1.0 / support_size);
}

Eigen::VectorXd empirical_prior(const std::vector<Group>& labels,
                                const GroupSet& support) {
  if (labels.empty()) {
    throw Error(Error::Code::kInvalidArgument,
                "cannot estimate a prior from zero labels");
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(support.size());
  for (const Group& g : labels) {
    const int idx = support.index_of(g);
    if (idx < 0) {
      throw Error(Error::Code::kSupportMismatch,
                  "label " + to_string(g) + " outside the support");
    }
    counts[idx] += 1.0;
  }
  return counts / counts.sum();
}

}  // namespace crm
