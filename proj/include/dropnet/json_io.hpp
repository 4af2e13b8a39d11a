#pragma once

#include <json.hpp>
#include <string>

#include "dropnet/coefficients.hpp"
#include "dropnet/estimators.hpp"
#include "dropnet/filter_model.hpp"
#include "dropnet/network.hpp"
#include "dropnet/tree.hpp"

namespace dropnet {

using json = nlohmann::json;

// Network file format:
//   {"layers": [{"rows": r, "cols": c, "weights": [row-major], "bias": [...],
//                "activation": "relu" | {"kind": "leaky_relu", "slope": s}}]}
json network_to_json(const Network& net);
Network network_from_json(const json& j);

// FilterModel format: {"n": n, "blocks": [[indices...]...], "keep_prob": [...]}
// or {"n": n, "pmf": [{"outcome": [0/1...], "prob": p}...]}.
json filter_model_to_json(const FilterModel& m);
FilterModel filter_model_from_json(const json& j);

// CoefficientTable format: {"r": r, "entries": [{"subset": bitmask, "value": v}...]}.
json coeff_table_to_json(const CoefficientTable& t);
CoefficientTable coeff_table_from_json(const json& j, std::vector<std::vector<int>> blocks = {});

// Tree format: vertices (id, level, parent), shared distribution list, edges
// (child, distribution index, stream).
json tree_to_json(const DropoutTree& tree);

json error_report_to_json(const ErrorReport& r);

Activation activation_from_json(const json& j);
json activation_to_json(const Activation& a);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit hash of the canonical dump, as fixed-width hex.
std::string config_hash(const json& config);

}  // namespace dropnet
