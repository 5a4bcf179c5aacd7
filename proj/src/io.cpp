#include "crm/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace crm {

namespace {

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) {
    throw Error(Error::Code::kIo, "binary blob shorter than expected");
  }
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw Error(Error::Code::kIo, "cannot write " + path.string());
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) {
    throw Error(Error::Code::kIo, "cannot read " + path.string());
  }
  return in;
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

Json to_json(const AttributeSpec& spec) {
  return Json{{"cardinalities", spec.cardinalities()}};
}

AttributeSpec attribute_spec_from_json(const Json& j) {
  if (!j.contains("cardinalities")) {
    throw Error(Error::Code::kConfig, "attribute spec needs 'cardinalities'");
  }
  return AttributeSpec(j.at("cardinalities").get<std::vector<int>>());
}

Json to_json(const Group& g) { return Json(g.values); }

Group group_from_json(const Json& j) {
  return Group(j.get<std::vector<int>>());
}

Json to_json(const GroupSet& s) {
  Json arr = Json::array();
  for (const Group& g : s) arr.push_back(to_json(g));
  return arr;
}

GroupSet group_set_from_json(const Json& j) {
  GroupSet s;
  for (const auto& item : j) s.insert(group_from_json(item));
  return s;
}

Json to_json(const ShiftScenario& scenario) {
  return Json{{"attribute_spec", to_json(scenario.attr)},
              {"train_support", to_json(scenario.train_support)},
              {"test_support", to_json(scenario.test_support)},
              {"train_prior", std::vector<double>(
                                  scenario.train_prior.data(),
                                  scenario.train_prior.data() +
                                      scenario.train_prior.size())},
              {"test_prior", std::vector<double>(
                                 scenario.test_prior.data(),
                                 scenario.test_prior.data() +
                                     scenario.test_prior.size())}};
}

ShiftScenario scenario_from_json(const Json& j) {
  ShiftScenario s;
  s.attr = attribute_spec_from_json(j.at("attribute_spec"));
  s.train_support = group_set_from_json(j.at("train_support"));
  s.test_support = group_set_from_json(j.at("test_support"));
  const auto tp = j.at("train_prior").get<std::vector<double>>();
  const auto qp = j.at("test_prior").get<std::vector<double>>();
  s.train_prior = Eigen::Map<const Eigen::VectorXd>(tp.data(), tp.size());
  s.test_prior = Eigen::Map<const Eigen::VectorXd>(qp.data(), qp.size());
  if (s.train_prior.size() != s.train_support.size() ||
      s.test_prior.size() != s.test_support.size()) {
    throw Error(Error::Code::kConfig, "scenario priors do not match supports");
  }
  return s;
}

Json to_json(const GaussianAedSpec& aed) {
  std::vector<std::vector<double>> means(aed.means.rows());
  for (int r = 0; r < aed.means.rows(); ++r) {
    means[r].resize(aed.means.cols());
    for (int c = 0; c < aed.means.cols(); ++c) means[r][c] = aed.means(r, c);
  }
  return Json{{"attribute_spec", to_json(aed.attr)},
              {"ambient_dim", aed.ambient_dim},
              {"means", means},
              {"energy_scale", aed.energy_scale},
              {"mean_scale", aed.mean_scale},
              {"spec_id", aed.spec_id}};
}

GaussianAedSpec aed_from_json(const Json& j) {
  GaussianAedSpec aed;
  aed.attr = attribute_spec_from_json(j.at("attribute_spec"));
  aed.ambient_dim = j.at("ambient_dim").get<int>();
  const auto means = j.at("means").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(means.size()) != aed.attr.total_onehot_len()) {
    throw Error(Error::Code::kConfig,
                "mean table rows must equal the sum of cardinalities");
  }
  aed.means.resize(means.size(), aed.ambient_dim);
  for (std::size_t r = 0; r < means.size(); ++r) {
    if (static_cast<int>(means[r].size()) != aed.ambient_dim) {
      throw Error(Error::Code::kConfig, "mean vector dimension mismatch");
    }
    for (int c = 0; c < aed.ambient_dim; ++c) aed.means(r, c) = means[r][c];
  }
  aed.energy_scale = j.at("energy_scale").get<double>();
  aed.mean_scale = j.value("mean_scale", 1.0);
  aed.spec_id = j.value("spec_id", std::string("custom"));
  return aed;
}

Json to_json(const EvalReport& report) {
  Json per_group = Json::array();
  for (const auto& g : report.per_group) {
    per_group.push_back(Json{{"group", to_json(g.group)},
                             {"samples", g.sample_count},
                             {"correct", g.correct},
                             {"accuracy", g.accuracy},
                             {"empty", g.empty}});
  }
  Json j{{"per_group", per_group},
         {"average_acc", report.average_acc},
         {"worst_group_acc", report.worst_group_acc},
         {"balanced_acc", report.balanced_acc},
         {"scenario", report.scenario_id},
         {"method", report.method},
         {"seed", report.seed}};
  if (report.oracle_agreement) j["oracle_agreement"] = *report.oracle_agreement;
  if (report.oracle_mean_tv) j["oracle_mean_tv"] = *report.oracle_mean_tv;
  return j;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "method: " << report.method << "  scenario: " << report.scenario_id
      << "  seed: " << report.seed << "\n";
  out << std::left << std::setw(16) << "group" << std::right << std::setw(10)
      << "samples" << std::setw(12) << "accuracy"
      << "\n";
  for (const auto& g : report.per_group) {
    out << std::left << std::setw(16) << to_string(g.group) << std::right
        << std::setw(10) << g.sample_count << std::setw(12) << std::fixed
        << std::setprecision(4) << g.accuracy << (g.empty ? "  (empty)" : "")
        << "\n";
  }
  out << std::setprecision(4) << "average_acc=" << report.average_acc
      << " balanced_acc=" << report.balanced_acc
      << " worst_group_acc=" << report.worst_group_acc << "\n";
  return out.str();
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream bin = open_out(dir / "features.bin", true);
    // Row-major on disk so the header's (n_samples, n) shape reads naturally.
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
      Eigen::VectorXd row = data.features.row(r).transpose();
      write_doubles(bin, row.data(), row.size());
    }
  }
  save_json(Json{{"n_samples", data.features.rows()},
                 {"n", data.features.cols()},
                 {"dtype", "float64"},
                 {"byte_order", "little"},
                 {"seed", data.seed},
                 {"source_spec_id", data.source_spec_id}},
            dir / "header.json");
  {
    std::ofstream csv = open_out(dir / "labels.csv", false);
    for (const Group& g : data.labels) {
      for (int i = 0; i < g.size(); ++i) {
        if (i > 0) csv << ",";
        csv << g.values[i];
      }
      csv << "\n";
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const Json header = load_json(dir / "header.json");
  const auto rows = header.at("n_samples").get<std::int64_t>();
  const auto cols = header.at("n").get<int>();
  Dataset data;
  data.seed = header.value("seed", 0ull);
  data.source_spec_id = header.value("source_spec_id", std::string());
  data.features.resize(rows, cols);
  {
    std::ifstream bin = open_in(dir / "features.bin", true);
    std::vector<double> row(cols);
    for (std::int64_t r = 0; r < rows; ++r) {
      read_doubles(bin, row.data(), row.size());
      for (int c = 0; c < cols; ++c) data.features(r, c) = row[c];
    }
  }
  {
    std::ifstream csv = open_in(dir / "labels.csv", false);
    std::string line;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::vector<int> values;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) values.push_back(std::stoi(cell));
      data.labels.emplace_back(std::move(values));
    }
  }
  if (static_cast<std::int64_t>(data.labels.size()) != rows) {
    throw Error(Error::Code::kIo, "label count does not match feature rows");
  }
  return data;
}

void save_model(const EnergyModel& model, const std::filesystem::path& stem) {
  Json header{{"attribute_spec", to_json(model.attr)},
              {"input_dim", model.input_dim},
              {"feature_kind", static_cast<int>(model.feature_map.kind)},
              {"hidden_width",
               model.feature_map.kind == FeatureKind::kMlp
                   ? static_cast<int>(model.feature_map.w1.rows())
                   : 0},
              {"train_support", to_json(model.train_support)},
              {"tensors", Json::array({"head", "bias", "log_prior", "w1", "b1"})}};
  save_json(header, std::filesystem::path(stem).concat(".json"));

  std::ofstream bin =
      open_out(std::filesystem::path(stem).concat(".bin"), true);
  write_doubles(bin, model.head.data(), model.head.size());
  write_doubles(bin, model.bias.data(), model.bias.size());
  write_doubles(bin, model.log_prior.data(), model.log_prior.size());
  if (model.feature_map.kind == FeatureKind::kMlp) {
    write_doubles(bin, model.feature_map.w1.data(),
                  model.feature_map.w1.size());
    write_doubles(bin, model.feature_map.b1.data(),
                  model.feature_map.b1.size());
  }
}

EnergyModel load_model(const std::filesystem::path& stem) {
  const Json header = load_json(std::filesystem::path(stem).concat(".json"));
  EnergyModel model;
  model.attr = attribute_spec_from_json(header.at("attribute_spec"));
  model.input_dim = header.at("input_dim").get<int>();
  model.feature_map.kind =
      static_cast<FeatureKind>(header.at("feature_kind").get<int>());
  model.feature_map.input_dim = model.input_dim;
  model.train_support = group_set_from_json(header.at("train_support"));

  std::ifstream bin = open_in(std::filesystem::path(stem).concat(".bin"), true);
  const int h = model.feature_map.kind == FeatureKind::kMlp
                    ? header.at("hidden_width").get<int>()
                    : (model.feature_map.kind == FeatureKind::kIdentityQuad
                           ? model.input_dim + 1
                           : model.input_dim);
  if (model.feature_map.kind == FeatureKind::kMlp) {
    model.feature_map.w1.resize(h, model.input_dim);
    model.feature_map.b1.resize(h);
  }
  model.head.resize(model.attr.total_onehot_len(), h);
  model.bias.resize(model.train_support.size());
  model.log_prior.resize(model.train_support.size());
  read_doubles(bin, model.head.data(), model.head.size());
  read_doubles(bin, model.bias.data(), model.bias.size());
  read_doubles(bin, model.log_prior.data(), model.log_prior.size());
  if (model.feature_map.kind == FeatureKind::kMlp) {
    read_doubles(bin, model.feature_map.w1.data(),
                 model.feature_map.w1.size());
    read_doubles(bin, model.feature_map.b1.data(),
                 model.feature_map.b1.size());
  }
  return model;
}

void save_json(const Json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out = open_out(path, false);
  out << j.dump(2) << "\n";
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, false);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(Error::Code::kConfig,
                "invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void save_growth_curve_csv(const HullGrowthCurve& curve,
                           const std::filesystem::path& path) {
  std::ofstream out = open_out(path, false);
  out << "trial,sample_index,hull_rank,spanned\n";
  for (const auto& trial : curve.trials) {
    for (std::size_t s = 0; s < trial.rank_after_sample.size(); ++s) {
      const bool spanned =
          trial.completed &&
          static_cast<std::int64_t>(s + 1) >= trial.samples_to_span;
      out << trial.trial_index << "," << (s + 1) << ","
          << trial.rank_after_sample[s] << "," << (spanned ? 1 : 0) << "\n";
    }
  }
}

Json growth_summary_json(const HullGrowthCurve& curve) {
  return Json{{"trials", curve.trials.size()},
              {"completed", curve.completed_trials()},
              {"max_samples", curve.max_samples},
              {"seed", curve.seed},
              {"mean_samples_to_span", curve.mean_samples_to_span()},
              {"median_samples_to_span", curve.quantile_samples_to_span(0.5)},
              {"p90_samples_to_span", curve.quantile_samples_to_span(0.9)}};
}

void save_bias_csv(const ExtrapolatedBias& bias, const EnergyModel& model,
                   const std::filesystem::path& path) {
  std::ofstream out = open_out(path, false);
  out << "group,b_star,b_hat,bootstrap_se\n";
  for (int t = 0; t < bias.support.size(); ++t) {
    const Group& g = bias.support.at(t);
    out << to_string(g) << "," << format_double(bias.values[t]) << ",";
    const int k = model.train_support.index_of(g);
    if (k >= 0) out << format_double(model.bias[k]);
    out << ",";
    if (bias.bootstrap_se.size() == bias.support.size()) {
      out << format_double(bias.bootstrap_se[t]);
    }
    out << "\n";
  }
}

}  // namespace crm
