#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "crm/attribute_space.hpp"

namespace crm {

/// Analytic Gaussian additive-energy distribution with energy
///   E(x, z) = energy_scale * sum_i ||x - mean(i, z_i)||^2,
/// equivalently x|z ~ Normal(mean bar = average of the selected means,
/// covariance (1 / (2 * energy_scale * m)) * I).
struct GaussianAedSpec {
  AttributeSpec attr;
  int ambient_dim = 0;
  /// Row (block_offset(i) + k) holds the mean vector for attribute i value k.
  Eigen::MatrixXd means;
  double energy_scale = 1.0;
  /// Norm used when the means were constructed; recorded so sweeps over the
  /// mean scale stay reproducible from the config alone.
  double mean_scale = 1.0;
  std::string spec_id;

  Eigen::VectorXd mean_for(int attribute, int value) const;
  Eigen::VectorXd group_mean(const Group& z) const;
  double noise_variance() const;

  /// log N(x | group_mean(z), noise_variance * I).
  double log_conditional_density(const Eigen::VectorXd& x,
                                 const Group& z) const;

  /// The stacked per-attribute energies E(x) = [E_1(x,1), ..., E_m(x,d)],
  /// E_i(x,k) = energy_scale * ||x - mean(i,k)||^2.
  Eigen::VectorXd energy_vector(const Eigen::VectorXd& x) const;

  /// Hash of the construction parameters; train/test sides of a scenario must
  /// share it (compositional shift condition 1).
  std::uint64_t content_hash() const;
};

struct Dataset {
  Eigen::MatrixXd features;  // n_samples x n, one row per sample
  std::vector<Group> labels;
  std::string source_spec_id;
  std::uint64_t seed = 0;

  std::int64_t size() const { return features.rows(); }
};

/// A (train support, test support, train prior, test prior) tuple defining
/// one compositional-shift experiment. Priors align with the support order.
/// Carries the attribute spec the supports live in.
struct ShiftScenario {
  AttributeSpec attr;
  GroupSet train_support;
  GroupSet test_support;
  Eigen::VectorXd train_prior;
  Eigen::VectorXd test_prior;

  const GroupSet& support(bool train_side) const {
    return train_side ? train_support : test_support;
  }
  const Eigen::VectorXd& prior(bool train_side) const {
    return train_side ? train_prior : test_prior;
  }
};

/// Condition 2 of a compositional shift: the test support is contained in the
/// Cartesian product of the train marginals. (Condition 1 holds whenever both
/// sides sample from the same GaussianAedSpec.)
bool is_compositional_shift(const ShiftScenario& scenario,
                            const AttributeSpec& spec);

/// sum(d_i) mutually orthogonal mean vectors of norm `scale`, obtained from a
/// QR factorization of a seeded Gaussian matrix. Requires n >= sum(d_i).
GaussianAedSpec make_orthogonal_means(const AttributeSpec& spec, int ambient_dim,
                                      std::uint64_t seed, double scale = 1.0);

/// The 2-D illustration: m=2, d=2, unit Gaussians centered on the four
/// quadrant corners (+-1, +-1); value index k maps to coordinate 2k-1.
GaussianAedSpec make_2d_quadrant_spec();

ShiftScenario drop_group(const GroupSet& full_support, const Group& dropped,
                         const AttributeSpec& spec);

ShiftScenario drop_groups(const GroupSet& full_support,
                          const GroupSet& dropped, const AttributeSpec& spec);

/// Retains ceil(fraction * total) groups drawn uniformly without replacement
/// from the full grid; test side is the full grid. Both priors uniform.
ShiftScenario random_retain_scenario(const AttributeSpec& spec,
                                     double retained_fraction,
                                     std::uint64_t seed);

/// Groups drawn i.i.d. from the side's prior, features from the group
/// conditional Gaussian. Deterministic given (seed, side).
Dataset sample_dataset(const GaussianAedSpec& aed, bool train_side,
                       const ShiftScenario& scenario, std::int64_t n_samples,
                       std::uint64_t seed);

/// Exact posterior of the generative model over `support` under `prior`:
/// softmax_z [log prior(z) - ||x - mean(z)||^2 / (2 sigma^2)].
Eigen::VectorXd bayes_posterior(const Eigen::VectorXd& x,
                                const GaussianAedSpec& aed,
                                const GroupSet& support,
                                const Eigen::VectorXd& prior);

/// Uniform probability vector of the given length.
Eigen::VectorXd uniform_prior(int support_size);

/// Normalized empirical frequencies of `labels` over `support`. Labels
/// outside the support raise a support mismatch error.
Eigen::VectorXd empirical_prior(const std::vector<Group>& labels,
                                const GroupSet& support);

}  // namespace crm
