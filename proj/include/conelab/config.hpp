#pragma once

// JSON documents for densities, ray ensembles, test functions and CKN
// parameters.
//
//   {"kind": "powerlaw",     "c": 1, "N": 3}
//   {"kind": "truncated",    "c": 1, "N": 3, "R": 1}
//   {"kind": "powerlaw_exp", "c": 1, "N": 3, "a": 1, "R": 2}      (R optional)
//   {"kind": "tabulated",    "nodes": [0, 1, 2], "values": [0, 1, 4]}
//   {"N": 3, "rays": [{"c": 1, "q": 0.5}, {"c": 2, "q": 0.5}]}
//   {"kind": "grid", "nodes": [...], "values": [...]}
//   {"kind": "hpw_extremal", "lambda": 1}
//   {"kind": "ckn_extremal", "lambda": 1}                          (needs p, q)

#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "conelab/functionals.hpp"
#include "conelab/needle.hpp"
#include "conelab/space.hpp"

namespace conelab {

using Json = nlohmann::ordered_json;

// Malformed or inconsistent configuration document.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parses an inline document.
Json parse_document(const std::string& text);
// Reads and parses a file.
Json load_document(const std::string& path);

Density density_from_json(const Json& j);
Json density_to_json(const Density& d);

NeedleEnsemble ensemble_from_json(const Json& j);
Json ensemble_to_json(const NeedleEnsemble& e);

TestFunction test_function_from_json(const Json& j, const std::optional<CknParams>& params);
Json test_function_to_json(const TestFunction& u);

}  // namespace conelab
