#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crm/affine_hull.hpp"
#include "crm/crm_adapt.hpp"
#include "crm/evaluation.hpp"
#include "crm/io.hpp"

namespace crm {

/// Posteriors for each row of x under the exact generative model.
std::vector<Eigen::VectorXd> batch_bayes_posteriors(
    const GaussianAedSpec& aed, const GroupSet& support,
    const Eigen::VectorXd& prior, const Eigen::MatrixXd& x);

std::vector<Eigen::VectorXd> batch_predict(const TestPredictor& predictor,
                                           const Eigen::MatrixXd& x);

std::vector<Group> argmax_groups(const std::vector<Eigen::VectorXd>& posteriors,
                                 const GroupSet& support);

/// Argmax of the attribute marginal of each posterior.
std::vector<int> attribute_predictions(
    const std::vector<Eigen::VectorXd>& posteriors, const GroupSet& support,
    const AttributeSpec& spec, int attribute);

// ---------------------------------------------------------------------------
// quadrant2d: the 2-D four-Gaussian illustration with one dropped group.

struct Quadrant2dConfig {
  std::int64_t train_samples = 20000;
  std::int64_t test_samples = 10000;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig train = default_train_config(FeatureKind::kIdentityQuad);
  /// Raster grid for decision-region dumps: [-extent, extent]^2 at `step`.
  double raster_extent = 3.0;
  double raster_step = 0.05;
  int bootstrap_resamples = 200;
  std::filesystem::path out_dir;  // empty: no files written
};

struct Quadrant2dSeedResult {
  std::uint64_t seed = 0;
  EvalReport crm_report;          // group prediction on the 4-group test set
  EvalReport erm_report;          // ERM group prediction on the same samples
  AgreementResult crm_vs_bayes;   // uniform-prior predictor vs Bayes oracle
  double bayes_wga_ceiling = 0.0; // exact per-group orthant integral
  double erm_dropped_group_acc = 0.0;
  ExtrapolatedBias bias;          // over the full grid
  Eigen::VectorXd bias_hat_gap;   // |B* - B_hat| on train-support groups
  int crm_uniform_regions = 0;    // distinct argmax cells in the raster
  int erm_regions = 0;
};

struct Quadrant2dResult {
  std::vector<Quadrant2dSeedResult> per_seed;
};

/// Exact Bayes accuracy of each quadrant group under the uniform 4-group
/// rule: product of 1-D Gaussian orthant integrals.
double quadrant_bayes_group_accuracy();

Quadrant2dResult run_quadrant2d(const Quadrant2dConfig& config);

// ---------------------------------------------------------------------------
// hull-growth: spanning-time curves and the Markov bound check.

struct HullGrowthConfig {
  int m = 2;
  std::vector<int> d_values = {10, 20};
  std::vector<int> c_values = {2, 4};
  std::int64_t trials = 10000;
  std::uint64_t seed = 7;
  int threads = 1;
  bool write_curves = false;  // per-sample curves are large
  std::filesystem::path out_dir;
};

struct MarkovCheck {
  int d = 0;
  int c = 0;
  std::int64_t threshold = 0;   // ceil(2 c (m d + d ln d))
  double fraction_incomplete = 0.0;
  double bound = 0.0;           // 1/c plus 3-sigma binomial slack
  bool pass = false;
};

struct HullGrowthResult {
  struct PerD {
    int d = 0;
    double mean_samples_to_span = 0.0;
    double median_samples_to_span = 0.0;
    double p90_samples_to_span = 0.0;
    int completed = 0;
    std::int64_t trials = 0;
  };
  std::vector<PerD> per_d;
  std::vector<MarkovCheck> markov;
};

HullGrowthResult run_hull_growth(const HullGrowthConfig& config);

// ---------------------------------------------------------------------------
// group-complexity: accuracy versus retained-group fraction (Appendix-G style
// orthogonal-mean Gaussians).

struct GroupComplexityConfig {
  std::vector<std::vector<int>> specs = {{10, 10}, {2, 2, 2, 2, 2, 2, 2, 2}};
  std::vector<double> fractions = {1.0, 0.5, 0.2, 0.1};
  int ambient_dim = 100;
  double mean_scale = 4.0;
  std::int64_t train_samples = 20000;
  std::int64_t test_samples = 10000;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig train = default_train_config(FeatureKind::kIdentityQuad);
  std::filesystem::path out_dir;
};

struct GroupComplexityCell {
  std::vector<int> cardinalities;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  int train_groups = 0;
  bool hull_covers_test = true;
  double attr0_average_acc = 0.0;
  double group_average_acc = 0.0;
};

struct GroupComplexityResult {
  std::vector<GroupComplexityCell> cells;

  /// Mean attribute-0 accuracy over seeds for one (spec, fraction) point.
  double mean_attr0_acc(const std::vector<int>& cardinalities,
                        double fraction) const;
};

GroupComplexityResult run_group_complexity(const GroupComplexityConfig& config);

// ---------------------------------------------------------------------------
// ablation: the four bias/prior variants on dropped-group scenarios.

struct AblationConfig {
  /// Flat indices of the group dropped in each scenario (quadrant spec).
  std::vector<int> dropped_groups = {0};
  /// Unnormalized test prior weights by flat group index; imbalance makes the
  /// empirical-prior variants differ from the uniform ones.
  std::vector<double> test_prior_weights = {0.4, 0.3, 0.2, 0.1};
  std::int64_t train_samples = 20000;
  std::int64_t test_samples = 10000;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig train = default_train_config(FeatureKind::kIdentityQuad);
  std::filesystem::path out_dir;
};

struct AblationRow {
  int dropped_group = 0;
  std::string variant;
  double average_acc = 0.0;
  double balanced_acc = 0.0;
  double worst_group_acc = 0.0;
};

struct AblationResult {
  /// Rows ordered scenario-major, variant order CRM, B*+Emp, B_hat+Unf,
  /// B_hat+Emp; metrics are means over seeds.
  std::vector<AblationRow> rows;

  const AblationRow& row(int dropped_group, const std::string& variant) const;
};

AblationResult run_ablation(const AblationConfig& config);

/// Wrote-once run manifest: experiment name, canonical config echo, a content
/// hash of that config, and the seed list.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& experiment, const Json& config_echo,
                    const std::vector<std::uint64_t>& seeds);

}  // namespace crm
