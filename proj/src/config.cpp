#include "conelab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

void expect_keys(const Json& j, const std::string& what, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) fail(what + ": unknown key \"" + key + "\"");
  }
}

double number(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) fail(what + ": missing \"" + key + "\"");
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "Infinity")) return kInfinity;
  fail(what + ": \"" + key + "\" must be a number");
}

std::vector<double> numbers(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) fail(what + ": missing \"" + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_array()) fail(what + ": \"" + key + "\" must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(what + ": \"" + key + "\" must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string kind_of(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    fail(what + " needs a string \"kind\"");
  }
  return j.at("kind").get<std::string>();
}

Json finite_or_tag(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

}  // namespace

Json parse_document(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(std::string("cannot parse JSON document: ") + e.what());
  }
}

Json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_document(buf.str());
}

Density density_from_json(const Json& j) {
  const std::string kind = kind_of(j, "density");
  try {
    if (kind == "powerlaw") {
      expect_keys(j, "powerlaw density", {"kind", "c", "N"});
      return Density::power_law(number(j, "c", kind), number(j, "N", kind));
    }
    if (kind == "truncated") {
      expect_keys(j, "truncated density", {"kind", "c", "N", "R"});
      return Density::truncated(number(j, "c", kind), number(j, "N", kind), number(j, "R", kind));
    }
    if (kind == "powerlaw_exp") {
      expect_keys(j, "powerlaw_exp density", {"kind", "c", "N", "a", "R"});
      const double R = j.contains("R") ? number(j, "R", kind) : kInfinity;
      return Density::power_law_exp(number(j, "c", kind), number(j, "N", kind), number(j, "a", kind), R);
    }
    if (kind == "tabulated") {
      expect_keys(j, "tabulated density", {"kind", "nodes", "values"});
      return Density::tabulated(numbers(j, "nodes", kind), numbers(j, "values", kind));
    }
  } catch (const DomainError& e) {
    fail(std::string("invalid density: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid density: ") + e.what());
  }
  fail("unknown density kind \"" + kind + "\"");
}

Json density_to_json(const Density& d) {
  return std::visit(
      [](const auto& k) -> Json {
        using K = std::decay_t<decltype(k)>;
        Json j;
        if constexpr (std::is_same_v<K, density::PowerLaw>) {
          j["kind"] = "powerlaw";
          j["c"] = k.c;
          j["N"] = k.N;
        } else if constexpr (std::is_same_v<K, density::TruncatedPowerLaw>) {
          j["kind"] = "truncated";
          j["c"] = k.c;
          j["N"] = k.N;
          j["R"] = k.R;
        } else if constexpr (std::is_same_v<K, density::PowerLawExp>) {
          j["kind"] = "powerlaw_exp";
          j["c"] = k.c;
          j["N"] = k.N;
          j["a"] = k.a;
          j["R"] = finite_or_tag(k.R);
        } else {
          j["kind"] = "tabulated";
          j["nodes"] = k.nodes;
          j["values"] = k.values;
        }
        return j;
      },
      d.kind());
}

NeedleEnsemble ensemble_from_json(const Json& j) {
  expect_keys(j, "ensemble", {"N", "rays"});
  NeedleEnsemble e;
  e.N = number(j, "N", "ensemble");
  if (!j.contains("rays") || !j.at("rays").is_array()) fail("ensemble: \"rays\" must be an array");
  for (const auto& r : j.at("rays")) {
    expect_keys(r, "ray", {"c", "q"});
    e.rays.push_back(Ray{number(r, "c", "ray"), number(r, "q", "ray")});
  }
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    fail(std::string("invalid ensemble: ") + ex.what());
  }
  return e;
}

Json ensemble_to_json(const NeedleEnsemble& e) {
  Json j;
  j["N"] = e.N;
  j["rays"] = Json::array();
  for (const auto& r : e.rays) j["rays"].push_back(Json{{"c", r.c}, {"q", r.q}});
  return j;
}

TestFunction test_function_from_json(const Json& j, const std::optional<CknParams>& params) {
  const std::string kind = kind_of(j, "test function");
  if (kind == "grid") {
    expect_keys(j, "grid function", {"kind", "nodes", "values"});
    GridFunction u{numbers(j, "nodes", kind), numbers(j, "values", kind)};
    try {
      u.validate();
    } catch (const std::invalid_argument& e) {
      fail(std::string("invalid grid function: ") + e.what());
    }
    return u;
  }
  if (kind == "hpw_extremal") {
    expect_keys(j, "hpw_extremal", {"kind", "lambda"});
    const double lambda = number(j, "lambda", kind);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("hpw_extremal: lambda must be positive");
    return hpw_extremal(lambda);
  }
  if (kind == "ckn_extremal") {
    expect_keys(j, "ckn_extremal", {"kind", "lambda"});
    if (!params) fail("ckn_extremal needs --p and --q");
    const double lambda = number(j, "lambda", kind);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("ckn_extremal: lambda must be positive");
    return ckn_extremal(*params, lambda);
  }
  fail("unknown test function kind \"" + kind + "\"");
}

Json test_function_to_json(const TestFunction& u) {
  return std::visit(
      [](const auto& f) -> Json {
        using F = std::decay_t<decltype(f)>;
        Json j;
        if constexpr (std::is_same_v<F, GridFunction>) {
          j["kind"] = "grid";
          j["nodes"] = f.nodes;
          j["values"] = f.values;
        } else if constexpr (std::is_same_v<F, HpwExtremal>) {
          j["kind"] = "hpw_extremal";
          j["lambda"] = f.lambda;
        } else {
          j["kind"] = "ckn_extremal";
          j["lambda"] = f.lambda;
        }
        return j;
      },
      u);
}

}  // namespace conelab
