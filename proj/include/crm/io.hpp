#pragma once

#include <filesystem>
#include <string>

#include "crm/affine_hull.hpp"
#include "crm/crm_adapt.hpp"
#include "crm/evaluation.hpp"
#include "crm/synthetic_aed.hpp"

#include <json.hpp>

namespace crm {

using Json = nlohmann::json;

// Attribute specs serialize as {"cardinalities": [...]}, groups as arrays of
// integers.
Json to_json(const AttributeSpec& spec);
AttributeSpec attribute_spec_from_json(const Json& j);
Json to_json(const Group& g);
Group group_from_json(const Json& j);
Json to_json(const GroupSet& s);
GroupSet group_set_from_json(const Json& j);

Json to_json(const ShiftScenario& scenario);
ShiftScenario scenario_from_json(const Json& j);

Json to_json(const GaussianAedSpec& aed);
GaussianAedSpec aed_from_json(const Json& j);

Json to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

/// Dataset directory layout: features.bin (flat little-endian float64, row
/// major), header.json (n_samples, n, dtype, seed, source spec id), and
/// labels.csv with one comma-separated group per row.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Model checkpoints: <stem>.json header plus <stem>.bin with the parameter
/// tensors as raw float64 in header order; reload is bit exact.
void save_model(const EnergyModel& model, const std::filesystem::path& stem);
EnergyModel load_model(const std::filesystem::path& stem);

void save_json(const Json& j, const std::filesystem::path& path);
Json load_json(const std::filesystem::path& path);

/// Growth curves as CSV: trial,sample_index,hull_rank,spanned.
void save_growth_curve_csv(const HullGrowthCurve& curve,
                           const std::filesystem::path& path);
/// Summary with mean/median/p90 samples-to-span and completion counts.
Json growth_summary_json(const HullGrowthCurve& curve);

/// B* table CSV: group, b_star, b_hat_if_any, bootstrap_se_if_any.
void save_bias_csv(const ExtrapolatedBias& bias, const EnergyModel& model,
                   const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace crm
