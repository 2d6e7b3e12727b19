#pragma once

// Run configuration: one JSON document describes the map, the perturbing
// field, the observable, the truncation windows and the quadrature budget.
// Parsing is strict about the keys it requires and names them in errors;
// echo_config materializes every default so a report can be re-run from its
// own provenance block.

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "s3/errors.hpp"
#include "s3/maps.hpp"
#include "s3/model.hpp"

namespace s3 {

struct FieldSpec {
    std::string type = "zero";  // zero | constant | sinusoid | coboundary | sum
    Vec2 value{0.0, 0.0};       // constant
    double amplitude = 1.0;     // sinusoid
    int wave_x = 1, wave_y = 0;
    double phase = 0.0;
    Vec2 direction{0.0, 1.0};
    std::shared_ptr<FieldSpec> of;                       // coboundary operand
    std::vector<std::shared_ptr<FieldSpec>> terms;       // sum operands
};

struct ObservableSpec {
    std::string type = "harmonic";  // harmonic | constant
    double amplitude = 1.0;
    int wave_x = 1, wave_y = 0;
    double phase = 0.0;
    double value = 0.0;  // constant
};

struct MapConfig {
    std::string family = "cat";  // cat | perturbed_cat
    double t = 0.0;
    FieldSpec direction;  // perturbation direction of the perturbed family
};

struct WindowConfig {
    std::size_t n_o1 = 40, n_o2 = 40, n_o3 = 40;
};

struct QuadratureConfig {
    std::string method = "probabilistic";  // probabilistic | deterministic
    std::size_t samples = 1000000;
    std::size_t burn_in = 1000;
    // deterministic curve settings
    std::size_t nodes = 4096;
    int n_push = -1;  // -1 selects the push count from the measured stretch
    double curve_length = 0.05;
    double alpha = 1.0;
    TorusPoint base{0.123, 0.456};
    Vec2 direction{1.0, 0.0};
};

struct OracleConfig {
    double t_step = 1e-3;
    std::size_t orbit_length = 10000000;
    std::size_t n_seeds = 8;
    std::size_t burn_in = 1000;
};

struct ValidationConfig {
    double residual_tol = 1e-8;
    std::size_t orbit_length = 30000;
};

struct S3Config {
    MapConfig map;
    FieldSpec field;
    ObservableSpec observable;
    WindowConfig windows;
    std::size_t series_length = 20;
    QuadratureConfig quadrature;
    OracleConfig oracle;
    ValidationConfig validation;
    std::uint64_t seed = 1;
    DerivativePolicy policy{};
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void missing_key(const std::string& path) {
    throw ConfigError("config: missing required key \"" + path + "\"");
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) missing_key(path);
    return *it;
}

inline double num(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError("config: \"" + path + "\" must be a number");
    return j.get<double>();
}

inline std::size_t size_val(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ConfigError("config: \"" + path + "\" must be a non-negative integer");
    return j.get<std::size_t>();
}

inline Vec2 vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("config: \"" + path + "\" must be a two-element array");
    return {num(j[0], path + "[0]"), num(j[1], path + "[1]")};
}

inline FieldSpec parse_field(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: \"" + path + "\" must be an object");
    FieldSpec s;
    s.type = require(j, "type", path + ".type").get<std::string>();
    if (s.type == "zero") {
        // no parameters
    } else if (s.type == "constant") {
        s.value = vec2(require(j, "value", path + ".value"), path + ".value");
    } else if (s.type == "sinusoid") {
        s.amplitude = num(require(j, "amplitude", path + ".amplitude"), path + ".amplitude");
        const json& w = require(j, "wave", path + ".wave");
        if (!w.is_array() || w.size() != 2)
            throw ConfigError("config: \"" + path + ".wave\" must be a two-element array");
        s.wave_x = w[0].get<int>();
        s.wave_y = w[1].get<int>();
        s.direction = vec2(require(j, "direction", path + ".direction"), path + ".direction");
        s.phase = j.value("phase", 0.0);
    } else if (s.type == "coboundary") {
        s.of = std::make_shared<FieldSpec>(parse_field(require(j, "of", path + ".of"), path + ".of"));
    } else if (s.type == "sum") {
        const json& ts = require(j, "terms", path + ".terms");
        if (!ts.is_array() || ts.empty())
            throw ConfigError("config: \"" + path + ".terms\" must be a non-empty array");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            std::ostringstream os;
            os << path << ".terms[" << i << "]";
            s.terms.push_back(std::make_shared<FieldSpec>(parse_field(ts[i], os.str())));
        }
    } else {
        throw ConfigError("config: unknown field type \"" + s.type + "\" at \"" + path + "\"");
    }
    return s;
}

inline ObservableSpec parse_observable(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: \"" + path + "\" must be an object");
    ObservableSpec s;
    s.type = require(j, "type", path + ".type").get<std::string>();
    if (s.type == "constant") {
        s.value = num(require(j, "value", path + ".value"), path + ".value");
    } else if (s.type == "harmonic") {
        s.amplitude = num(require(j, "amplitude", path + ".amplitude"), path + ".amplitude");
        const json& w = require(j, "wave", path + ".wave");
        if (!w.is_array() || w.size() != 2)
            throw ConfigError("config: \"" + path + ".wave\" must be a two-element array");
        s.wave_x = w[0].get<int>();
        s.wave_y = w[1].get<int>();
        s.phase = j.value("phase", 0.0);
    } else {
        throw ConfigError("config: unknown observable type \"" + s.type + "\" at \"" + path +
                          "\"");
    }
    return s;
}

inline json field_json(const FieldSpec& s) {
    json j;
    j["type"] = s.type;
    if (s.type == "constant") j["value"] = {s.value.x, s.value.y};
    if (s.type == "sinusoid") {
        j["amplitude"] = s.amplitude;
        j["wave"] = {s.wave_x, s.wave_y};
        j["direction"] = {s.direction.x, s.direction.y};
        j["phase"] = s.phase;
    }
    if (s.type == "coboundary") j["of"] = field_json(*s.of);
    if (s.type == "sum") {
        json ts = json::array();
        for (const auto& t : s.terms) ts.push_back(field_json(*t));
        j["terms"] = ts;
    }
    return j;
}

inline json observable_json(const ObservableSpec& s) {
    json j;
    j["type"] = s.type;
    if (s.type == "constant") j["value"] = s.value;
    if (s.type == "harmonic") {
        j["amplitude"] = s.amplitude;
        j["wave"] = {s.wave_x, s.wave_y};
        j["phase"] = s.phase;
    }
    return j;
}

}  // namespace detail

inline S3Config parse_config(const nlohmann::json& j) {
    using detail::require;
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    S3Config c;

    const nlohmann::json& jm = require(j, "map", "map");
    c.map.family = require(jm, "family", "map.family").get<std::string>();
    if (c.map.family == "cat") {
        // no parameters
    } else if (c.map.family == "perturbed_cat") {
        c.map.t = detail::num(require(jm, "t", "map.t"), "map.t");
        c.map.direction = detail::parse_field(require(jm, "direction", "map.direction"),
                                              "map.direction");
    } else {
        throw ConfigError("config: unknown map family \"" + c.map.family + "\"");
    }

    c.field = detail::parse_field(require(j, "field", "field"), "field");
    c.observable = detail::parse_observable(require(j, "observable", "observable"), "observable");

    if (auto it = j.find("windows"); it != j.end()) {
        c.windows.n_o1 = detail::size_val(it->value("n_o1", 40), "windows.n_o1");
        c.windows.n_o2 = detail::size_val(it->value("n_o2", 40), "windows.n_o2");
        c.windows.n_o3 = detail::size_val(it->value("n_o3", 40), "windows.n_o3");
    }
    if (c.windows.n_o1 == 0 || c.windows.n_o2 == 0 || c.windows.n_o3 == 0)
        throw ConfigError("config: all windows.n_o* must be positive");

    c.series_length = detail::size_val(j.value("series_length", 20), "series_length");
    if (c.series_length == 0) throw ConfigError("config: \"series_length\" must be positive");

    if (auto it = j.find("quadrature"); it != j.end()) {
        const nlohmann::json& q = *it;
        c.quadrature.method = q.value("method", std::string("probabilistic"));
        if (c.quadrature.method != "probabilistic" && c.quadrature.method != "deterministic")
            throw ConfigError("config: unknown quadrature method \"" + c.quadrature.method +
                              "\"");
        c.quadrature.samples = detail::size_val(q.value("samples", 1000000), "quadrature.samples");
        c.quadrature.burn_in = detail::size_val(q.value("burn_in", 1000), "quadrature.burn_in");
        c.quadrature.nodes = detail::size_val(q.value("nodes", 4096), "quadrature.nodes");
        c.quadrature.n_push = q.value("n_push", -1);
        c.quadrature.curve_length = q.value("curve_length", 0.05);
        c.quadrature.alpha = q.value("alpha", 1.0);
        if (q.contains("base")) {
            const Vec2 b = detail::vec2(q["base"], "quadrature.base");
            c.quadrature.base = {b.x, b.y};
        }
        if (q.contains("direction"))
            c.quadrature.direction = detail::vec2(q["direction"], "quadrature.direction");
    }
    if (c.quadrature.method == "probabilistic" && c.quadrature.samples < 1000)
        throw ConfigError("config: \"quadrature.samples\" must be at least 1000");
    if (c.quadrature.method == "deterministic" && c.quadrature.nodes < 8)
        throw ConfigError("config: \"quadrature.nodes\" must be at least 8");

    if (auto it = j.find("oracle"); it != j.end()) {
        c.oracle.t_step = it->value("t_step", 1e-3);
        c.oracle.orbit_length =
            detail::size_val(it->value("orbit_length", 10000000), "oracle.orbit_length");
        c.oracle.n_seeds = detail::size_val(it->value("n_seeds", 8), "oracle.n_seeds");
        c.oracle.burn_in = detail::size_val(it->value("burn_in", 1000), "oracle.burn_in");
    }
    if (c.oracle.t_step <= 0.0) throw ConfigError("config: \"oracle.t_step\" must be positive");
    if (c.oracle.n_seeds < 2) throw ConfigError("config: \"oracle.n_seeds\" must be at least 2");
    if (c.oracle.orbit_length < 1000)
        throw ConfigError("config: \"oracle.orbit_length\" must be at least 1000");

    if (auto it = j.find("validation"); it != j.end()) {
        c.validation.residual_tol = it->value("residual_tol", 1e-8);
        c.validation.orbit_length =
            detail::size_val(it->value("orbit_length", 30000), "validation.orbit_length");
    }
    if (c.validation.residual_tol <= 0.0)
        throw ConfigError("config: \"validation.residual_tol\" must be positive");
    if (c.validation.orbit_length < 1000)
        throw ConfigError("config: \"validation.orbit_length\" must be at least 1000");

    c.seed = j.value("seed", std::uint64_t{1});
    if (auto it = j.find("derivatives"); it != j.end()) {
        c.policy.allow_fd = it->value("allow_fd", true);
        c.policy.fd_step = it->value("fd_step", 1e-5);
    }
    return c;
}

inline S3Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

/// Full configuration with every default materialized; parse_config on the
/// result reproduces the same S3Config.
inline nlohmann::json echo_config(const S3Config& c) {
    nlohmann::json j;
    j["map"]["family"] = c.map.family;
    if (c.map.family == "perturbed_cat") {
        j["map"]["t"] = c.map.t;
        j["map"]["direction"] = detail::field_json(c.map.direction);
    }
    j["field"] = detail::field_json(c.field);
    j["observable"] = detail::observable_json(c.observable);
    j["windows"] = {{"n_o1", c.windows.n_o1}, {"n_o2", c.windows.n_o2}, {"n_o3", c.windows.n_o3}};
    j["series_length"] = c.series_length;
    j["quadrature"] = {{"method", c.quadrature.method},
                       {"samples", c.quadrature.samples},
                       {"burn_in", c.quadrature.burn_in},
                       {"nodes", c.quadrature.nodes},
                       {"n_push", c.quadrature.n_push},
                       {"curve_length", c.quadrature.curve_length},
                       {"alpha", c.quadrature.alpha},
                       {"base", {c.quadrature.base.x, c.quadrature.base.y}},
                       {"direction", {c.quadrature.direction.x, c.quadrature.direction.y}}};
    j["oracle"] = {{"t_step", c.oracle.t_step},
                   {"orbit_length", c.oracle.orbit_length},
                   {"n_seeds", c.oracle.n_seeds},
                   {"burn_in", c.oracle.burn_in}};
    j["validation"] = {{"residual_tol", c.validation.residual_tol},
                       {"orbit_length", c.validation.orbit_length}};
    j["seed"] = c.seed;
    j["derivatives"] = {{"allow_fd", c.policy.allow_fd}, {"fd_step", c.policy.fd_step}};
    return j;
}

// ---------------------------------------------------------------------------
// Materialization

inline VectorField build_field(const MapModel& m, const FieldSpec& s) {
    if (s.type == "zero") return fields::zero();
    if (s.type == "constant") return fields::constant(s.value.x, s.value.y);
    if (s.type == "sinusoid")
        return fields::sinusoid(s.amplitude, s.wave_x, s.wave_y, s.direction, s.phase);
    if (s.type == "coboundary") return fields::coboundary(m, build_field(m, *s.of));
    if (s.type == "sum") {
        std::vector<VectorField> terms;
        terms.reserve(s.terms.size());
        for (const auto& t : s.terms) terms.push_back(build_field(m, *t));
        return fields::sum(std::move(terms));
    }
    throw ConfigError("config: unknown field type \"" + s.type + "\"");
}

inline Observable build_observable(const ObservableSpec& s) {
    if (s.type == "constant") return observables::constant(s.value);
    if (s.type == "harmonic")
        return observables::harmonic(s.amplitude, s.wave_x, s.wave_y, s.phase);
    throw ConfigError("config: unknown observable type \"" + s.type + "\"");
}

inline MapModel build_map(const S3Config& c) {
    if (c.map.family == "cat") return cat_map();
    if (c.map.family == "perturbed_cat") {
        const MapModel base = cat_map();
        return perturbed_cat_map(c.map.t, build_field(base, c.map.direction), c.policy);
    }
    throw ConfigError("config: unknown map family \"" + c.map.family + "\"");
}

}  // namespace s3
