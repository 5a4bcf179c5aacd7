#include "crm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crm/rng.hpp"
#include "crm/util.hpp"

namespace crm {

std::vector<Eigen::VectorXd> batch_bayes_posteriors(
    const GaussianAedSpec& aed, const GroupSet& support,
    const Eigen::VectorXd& prior, const Eigen::MatrixXd& x) {
  std::vector<Eigen::VectorXd> posteriors;
  posteriors.reserve(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    posteriors.push_back(
        bayes_posterior(x.row(r).transpose(), aed, support, prior));
  }
  return posteriors;
}

std::vector<Eigen::VectorXd> batch_predict(const TestPredictor& predictor,
                                           const Eigen::MatrixXd& x) {
  std::vector<Eigen::VectorXd> posteriors;
  posteriors.reserve(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    posteriors.push_back(predict(predictor, x.row(r).transpose()));
  }
  return posteriors;
}

std::vector<Group> argmax_groups(const std::vector<Eigen::VectorXd>& posteriors,
                                 const GroupSet& support) {
  std::vector<Group> groups;
  groups.reserve(posteriors.size());
  for (const auto& p : posteriors) groups.push_back(support.at(argmax(p)));
  return groups;
}

std::vector<int> attribute_predictions(
    const std::vector<Eigen::VectorXd>& posteriors, const GroupSet& support,
    const AttributeSpec& spec, int attribute) {
  std::vector<int> predictions;
  predictions.reserve(posteriors.size());
  for (const auto& p : posteriors) {
    predictions.push_back(argmax(marginalize(p, support, spec, attribute)));
  }
  return predictions;
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& experiment, const Json& config_echo,
                    const std::vector<std::uint64_t>& seeds) {
  const std::string canonical = config_echo.dump();
  Json manifest{{"experiment", experiment},
                {"config", config_echo},
                {"config_hash", fnv1a64(canonical)},
                {"seeds", seeds}};
  save_json(manifest, out_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// quadrant2d

double quadrant_bayes_group_accuracy() {
  // Decision region of each corner group is its quadrant; the group
  // conditional is a unit Gaussian at distance 1 from both boundaries.
  const double phi1 = normal_cdf(1.0);
  return phi1 * phi1;
}

namespace {

int count_raster_regions(const std::vector<Group>& cells) {
  std::set<std::vector<int>> distinct;
  for (const Group& g : cells) distinct.insert(g.values);
  return static_cast<int>(distinct.size());
}

void write_raster_csv(const std::filesystem::path& path,
                      const std::vector<double>& xs,
                      const std::vector<double>& ys,
                      const std::vector<Group>& cells) {
  std::ofstream out(path);
  if (!out) throw Error(Error::Code::kIo, "cannot write " + path.string());
  out << "x1,x2,group\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out << format_double(xs[i]) << "," << format_double(ys[i]) << ","
        << cells[i].values[0] << cells[i].values[1] << "\n";
  }
}

std::vector<double> raster_axis(double extent, double step) {
  std::vector<double> axis;
  for (double v = -extent; v <= extent + 1e-12; v += step) axis.push_back(v);
  return axis;
}

}  // namespace

Quadrant2dResult run_quadrant2d(const Quadrant2dConfig& config) {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet full = enumerate_all_groups(aed.attr);
  const Group dropped({0, 0});  // the (-1,-1) corner
  const ShiftScenario scenario = drop_group(full, dropped, aed.attr);

  Quadrant2dResult result;
  for (std::uint64_t seed : config.seeds) {
    Quadrant2dSeedResult r;
    r.seed = seed;

    const Dataset train =
        sample_dataset(aed, true, scenario, config.train_samples, seed);
    const Dataset test =
        sample_dataset(aed, false, scenario, config.test_samples, seed);

    TrainConfig tc = config.train;
    tc.seed = seed;
    const EnergyModel model = fit_crm(train, scenario, tc);
    const ErmModel erm = fit_erm_group(train, scenario, tc);

    r.bias = extrapolate_bias(model, train, scenario.test_support,
                              config.bootstrap_resamples, seed);
    const TestPredictor crm = make_test_predictor(
        model, scenario.test_support, uniform_prior(scenario.test_support.size()),
        r.bias.values, "CRM");

    r.bias_hat_gap.resize(model.train_support.size());
    for (int k = 0; k < model.train_support.size(); ++k) {
      const int t = scenario.test_support.index_of(model.train_support.at(k));
      r.bias_hat_gap[k] = std::abs(r.bias.values[t] - model.bias[k]);
    }

    const auto crm_post = batch_predict(crm, test.features);
    const auto bayes_post = batch_bayes_posteriors(
        aed, scenario.test_support, scenario.test_prior, test.features);
    const auto crm_pred = argmax_groups(crm_post, scenario.test_support);

    std::vector<Eigen::VectorXd> erm_post;
    erm_post.reserve(test.features.rows());
    for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
      erm_post.push_back(predict_erm(erm, test.features.row(i).transpose()));
    }
    const auto erm_pred = argmax_groups(erm_post, erm.support);

    r.crm_report = evaluate_groups(crm_pred, test.labels, scenario.test_support);
    r.crm_report.method = "CRM";
    r.crm_report.scenario_id = "quadrant2d-drop(0,0)";
    r.crm_report.seed = seed;
    r.erm_report = evaluate_groups(erm_pred, test.labels, scenario.test_support);
    r.erm_report.method = "ERM";
    r.erm_report.scenario_id = r.crm_report.scenario_id;
    r.erm_report.seed = seed;
    r.crm_vs_bayes = oracle_agreement(crm_post, bayes_post);
    r.crm_report.oracle_agreement = r.crm_vs_bayes.argmax_agreement;
    r.crm_report.oracle_mean_tv = r.crm_vs_bayes.mean_total_variation;
    r.bayes_wga_ceiling = quadrant_bayes_group_accuracy();

    for (const auto& g : r.erm_report.per_group) {
      if (g.group == dropped) r.erm_dropped_group_acc = g.accuracy;
    }

    // Decision-region rasters (train-prior CRM, uniform-prior CRM, ERM).
    const std::vector<double> axis =
        raster_axis(config.raster_extent, config.raster_step);
    std::vector<double> xs, ys;
    std::vector<Group> crm_cells, train_cells, erm_cells;
    for (double y : axis) {
      for (double x : axis) {
        Eigen::Vector2d point(x, y);
        xs.push_back(x);
        ys.push_back(y);
        crm_cells.push_back(
            scenario.test_support.at(argmax(predict(crm, point))));
        train_cells.push_back(model.train_support.at(
            argmax(log_posterior_train(model, point))));
        erm_cells.push_back(erm.support.at(argmax(predict_erm(erm, point))));
      }
    }
    r.crm_uniform_regions = count_raster_regions(crm_cells);
    r.erm_regions = count_raster_regions(erm_cells);

    if (!config.out_dir.empty()) {
      const auto dir = config.out_dir / ("seed" + std::to_string(seed));
      std::filesystem::create_directories(dir);
      write_raster_csv(dir / "raster_crm_uniform.csv", xs, ys, crm_cells);
      write_raster_csv(dir / "raster_crm_train_prior.csv", xs, ys, train_cells);
      write_raster_csv(dir / "raster_erm.csv", xs, ys, erm_cells);
      save_json(to_json(r.crm_report), dir / "report_crm.json");
      save_json(to_json(r.erm_report), dir / "report_erm.json");
      save_bias_csv(r.bias, model, dir / "bias.csv");
      save_model(model, dir / "model");
    }
    result.per_seed.push_back(std::move(r));
  }

  if (!config.out_dir.empty()) {
    Json echo{{"train_samples", config.train_samples},
              {"test_samples", config.test_samples},
              {"raster_extent", config.raster_extent},
              {"raster_step", config.raster_step},
              {"steps", config.train.steps},
              {"batch_size", config.train.batch_size},
              {"learning_rate", config.train.learning_rate}};
    write_manifest(config.out_dir, "quadrant2d", echo, config.seeds);
  }
  return result;
}

// ---------------------------------------------------------------------------
// hull-growth

HullGrowthResult run_hull_growth(const HullGrowthConfig& config) {
  HullGrowthResult result;
  for (int d : config.d_values) {
    std::vector<int> cards(config.m, d);
    const AttributeSpec spec(cards);

    std::int64_t max_threshold = 0;
    for (int c : config.c_values) {
      const auto threshold = static_cast<std::int64_t>(std::ceil(
          2.0 * c * (config.m * d + d * std::log(static_cast<double>(d)))));
      max_threshold = std::max(max_threshold, threshold);
    }
    // Simulate past the largest threshold so every Markov check can resolve.
    const std::int64_t max_samples = std::max<std::int64_t>(
        2 * max_threshold, 64);

    const HullGrowthCurve curve = simulate_hull_growth(
        spec, config.trials, config.seed, max_samples, config.threads);

    HullGrowthResult::PerD per_d;
    per_d.d = d;
    per_d.trials = config.trials;
    per_d.completed = curve.completed_trials();
    per_d.mean_samples_to_span = curve.mean_samples_to_span();
    per_d.median_samples_to_span = curve.quantile_samples_to_span(0.5);
    per_d.p90_samples_to_span = curve.quantile_samples_to_span(0.9);
    result.per_d.push_back(per_d);

    for (int c : config.c_values) {
      MarkovCheck check;
      check.d = d;
      check.c = c;
      check.threshold = static_cast<std::int64_t>(std::ceil(
          2.0 * c * (config.m * d + d * std::log(static_cast<double>(d)))));
      check.fraction_incomplete = curve.fraction_incomplete_at(check.threshold);
      const double p = 1.0 / c;
      check.bound = p + 3.0 * std::sqrt(p * (1.0 - p) /
                                        static_cast<double>(config.trials));
      check.pass = check.fraction_incomplete <= check.bound;
      result.markov.push_back(check);
    }

    if (!config.out_dir.empty()) {
      std::filesystem::create_directories(config.out_dir);
      if (config.write_curves) {
        save_growth_curve_csv(
            curve, config.out_dir / ("growth_d" + std::to_string(d) + ".csv"));
      }
      save_json(growth_summary_json(curve),
                config.out_dir /
                    ("growth_d" + std::to_string(d) + "_summary.json"));
    }
  }

  if (!config.out_dir.empty()) {
    Json markov = Json::array();
    for (const auto& check : result.markov) {
      markov.push_back(Json{{"d", check.d},
                            {"c", check.c},
                            {"threshold", check.threshold},
                            {"fraction_incomplete", check.fraction_incomplete},
                            {"bound", check.bound},
                            {"pass", check.pass}});
    }
    save_json(markov, config.out_dir / "markov_checks.json");
    Json echo{{"m", config.m},
              {"d_values", config.d_values},
              {"c_values", config.c_values},
              {"trials", config.trials}};
    write_manifest(config.out_dir, "hull-growth", echo, {config.seed});
  }
  return result;
}

// ---------------------------------------------------------------------------
// group-complexity

GroupComplexityResult run_group_complexity(
    const GroupComplexityConfig& config) {
  GroupComplexityResult result;
  std::ofstream csv;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    csv.open(config.out_dir / "group_complexity.csv");
    csv << "cardinalities,fraction,seed,train_groups,hull_covers_test,"
           "attr0_average_acc,group_average_acc\n";
  }

  for (const auto& cards : config.specs) {
    const AttributeSpec spec(cards);
    for (double fraction : config.fractions) {
      for (std::uint64_t seed : config.seeds) {
        GroupComplexityCell cell;
        cell.cardinalities = cards;
        cell.fraction = fraction;
        cell.seed = seed;

        const GaussianAedSpec aed = make_orthogonal_means(
            spec, config.ambient_dim, seed, config.mean_scale);
        const ShiftScenario scenario =
            fraction >= 1.0
                ? drop_groups(enumerate_all_groups(spec), GroupSet(), spec)
                : random_retain_scenario(spec, fraction, seed);
        cell.train_groups = scenario.train_support.size();

        const GroupSet hull = enumerate_hull(scenario.train_support, spec);
        cell.hull_covers_test = scenario.test_support.is_subset_of(hull);

        const Dataset train =
            sample_dataset(aed, true, scenario, config.train_samples, seed);
        const Dataset test =
            sample_dataset(aed, false, scenario, config.test_samples, seed);

        TrainConfig tc = config.train;
        tc.seed = seed;
        const EnergyModel model = fit_crm(train, scenario, tc);
        const TestPredictor predictor =
            crm_predictor(model, train, scenario.test_support);

        const auto posteriors = batch_predict(predictor, test.features);
        const auto attr0 = attribute_predictions(
            posteriors, scenario.test_support, spec, 0);
        const EvalReport attr_report =
            evaluate(attr0, test.labels, 0, scenario.test_support);
        const auto group_pred = argmax_groups(posteriors, scenario.test_support);
        const EvalReport group_report =
            evaluate_groups(group_pred, test.labels, scenario.test_support);

        cell.attr0_average_acc = attr_report.average_acc;
        cell.group_average_acc = group_report.average_acc;
        result.cells.push_back(cell);

        if (csv.is_open()) {
          std::ostringstream cardstr;
          for (std::size_t i = 0; i < cards.size(); ++i) {
            if (i) cardstr << "x";
            cardstr << cards[i];
          }
          csv << cardstr.str() << "," << format_double(fraction) << "," << seed
              << "," << cell.train_groups << ","
              << (cell.hull_covers_test ? 1 : 0) << ","
              << format_double(cell.attr0_average_acc) << ","
              << format_double(cell.group_average_acc) << "\n";
        }
      }
    }
  }

  if (!config.out_dir.empty()) {
    Json echo{{"specs", config.specs},
              {"fractions", config.fractions},
              {"ambient_dim", config.ambient_dim},
              {"mean_scale", config.mean_scale},
              {"train_samples", config.train_samples},
              {"test_samples", config.test_samples}};
    write_manifest(config.out_dir, "group-complexity", echo, config.seeds);
  }
  return result;
}

double GroupComplexityResult::mean_attr0_acc(
    const std::vector<int>& cardinalities, double fraction) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& cell : cells) {
    if (cell.cardinalities == cardinalities &&
        std::abs(cell.fraction - fraction) < 1e-12) {
      sum += cell.attr0_average_acc;
      ++n;
    }
  }
  if (n == 0) {
    throw Error(Error::Code::kInvalidArgument,
                "no cells recorded for the requested point");
  }
  return sum / n;
}

// ---------------------------------------------------------------------------
// ablation

AblationResult run_ablation(const AblationConfig& config) {
  const GaussianAedSpec aed = make_2d_quadrant_spec();
  const GroupSet full = enumerate_all_groups(aed.attr);
  if (config.test_prior_weights.size() !=
      static_cast<std::size_t>(full.size())) {
    throw Error(Error::Code::kConfig,
                "test prior weights must cover every group of the grid");
  }

  AblationResult result;
  std::ofstream csv;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    csv.open(config.out_dir / "ablation.csv");
    csv << "dropped_group,variant,average_acc,balanced_acc,worst_group_acc\n";
  }

  for (int dropped_flat : config.dropped_groups) {
    const Group dropped = aed.attr.group_from_flat(dropped_flat);
    ShiftScenario scenario = drop_group(full, dropped, aed.attr);
    Eigen::VectorXd weights(full.size());
    for (int i = 0; i < full.size(); ++i) {
      weights[i] = config.test_prior_weights[static_cast<std::size_t>(
          aed.attr.flat_index(scenario.test_support.at(i)))];
    }
    scenario.test_prior = weights / weights.sum();

    // variant -> accumulated metrics over seeds
    std::vector<std::string> variant_order;
    std::map<std::string, Eigen::Vector3d> totals;

    for (std::uint64_t seed : config.seeds) {
      const Dataset train =
          sample_dataset(aed, true, scenario, config.train_samples, seed);
      const Dataset test =
          sample_dataset(aed, false, scenario, config.test_samples, seed);

      TrainConfig tc = config.train;
      tc.seed = seed;
      const EnergyModel model = fit_crm(train, scenario, tc);
      const auto variants =
          ablation_variants(model, train, scenario, test.labels);

      for (const TestPredictor& predictor : variants) {
        const auto posteriors = batch_predict(predictor, test.features);
        const auto pred = argmax_groups(posteriors, scenario.test_support);
        const EvalReport report =
            evaluate_groups(pred, test.labels, scenario.test_support);
        if (totals.find(predictor.name) == totals.end()) {
          variant_order.push_back(predictor.name);
          totals[predictor.name] = Eigen::Vector3d::Zero();
        }
        totals[predictor.name] += Eigen::Vector3d(
            report.average_acc, report.balanced_acc, report.worst_group_acc);
      }
    }

    for (const std::string& variant : variant_order) {
      AblationRow row;
      row.dropped_group = dropped_flat;
      row.variant = variant;
      const Eigen::Vector3d mean =
          totals[variant] / static_cast<double>(config.seeds.size());
      row.average_acc = mean[0];
      row.balanced_acc = mean[1];
      row.worst_group_acc = mean[2];
      result.rows.push_back(row);
      if (csv.is_open()) {
        csv << dropped_flat << "," << variant << ","
            << format_double(row.average_acc) << ","
            << format_double(row.balanced_acc) << ","
            << format_double(row.worst_group_acc) << "\n";
      }
    }
  }

  if (!config.out_dir.empty()) {
    Json echo{{"dropped_groups", config.dropped_groups},
              {"test_prior_weights", config.test_prior_weights},
              {"train_samples", config.train_samples},
              {"test_samples", config.test_samples}};
    write_manifest(config.out_dir, "ablation", echo, config.seeds);
  }
  return result;
}

const AblationRow& AblationResult::row(int dropped_group,
                                       const std::string& variant) const {
  for (const auto& r : rows) {
    if (r.dropped_group == dropped_group && r.variant == variant) return r;
  }
  throw Error(Error::Code::kInvalidArgument,
              "no ablation row for the requested variant");
}

}  // namespace crm
