#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "sae/estimation.hpp"
#include "sae/mspe.hpp"
#include "sae/simulation.hpp"

namespace sae {

/// Shortest-roundtrip-safe text form of a double: 17 significant digits.
std::string format_real(double value);

/// Reads `area_id,y,D,x1,...,xp`. Errors name the offending row and column;
/// rows are counted from 1 at the header.
AreaDataset read_dataset_csv(std::istream& in);
AreaDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const AreaDataset& data);

nlohmann::ordered_json to_json(const ParamVector& delta);
nlohmann::ordered_json to_json(const FitResult& fit);

/// `area_id,method,value,m1,m2,bias_correction,used_tilt,tilt_component`.
/// tilt_component is 1-based, 0 for methods without a tilt.
void write_breakdown_csv(std::ostream& out, std::span<const MspeBreakdown> breakdowns);

/// Config keys mirror SimulationConfig field names; unknown keys are rejected.
/// Missing keys keep their defaults.
SimulationConfig config_from_json(const nlohmann::json& j);
SimulationConfig read_config(const std::string& path);
nlohmann::ordered_json to_json(const SimulationConfig& cfg);

nlohmann::ordered_json to_json(const SixNumberSummary& s);
nlohmann::ordered_json to_json(const SimulationSummary& summary);

/// `area_id,method,smspe,rb,cv`.
void write_per_area_csv(std::ostream& out, const SimulationSummary& summary);

/// `replicate,area_id,theta,theta_hat,<method>...` (replicates 1-based).
void write_raw_csv(std::ostream& out, const SimulationSummary& summary);

}  // namespace sae
