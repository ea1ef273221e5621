#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/nonlocal.hpp"
#include "nlb/stokes.hpp"

namespace nlb {

/// Fully materialized run configuration. Every field has a definite value
/// after parsing; the canonical echo serializes all of them with sorted keys
/// so that parse -> echo -> parse is a fixed point and runs are diffable.
struct RunConfig {
    int nx = 32;
    Params physics;

    int basis_n = 0;          // 0 = no velocity (heat-only run)
    std::string basis_cache;  // directory for eigenbasis caching, "" = off

    double dt = 0.0;
    double t_end = 0.0;
    long output_every = 1;    // ledger cadence in steps

    std::string scenario_id;
    double scenario_t_b = 2.0;
    double scenario_amplitude = 1.0;
    double scenario_epsilon = 1e-3;
    std::string scenario_potential = "none";
    std::string theta0_file;
    std::string theta_b_file;
    std::vector<double> c0;   // initial velocity coefficients, padded with zeros

    std::string out_dir;      // "" = in-memory run, no artifacts
    bool out_fields = true;

    std::string splitting = "heat-first";

    long steps() const { return std::llround(t_end / dt); }
};

namespace detail {

/// Strict-schema accessor: every key must be consumed, unknown keys are
/// reported with their full path.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    const nlohmann::json* find(const std::string& name) {
        seen_.insert(name);
        auto it = j_.find(name);
        return it == j_.end() ? nullptr : &*it;
    }

    const nlohmann::json& require(const std::string& name) {
        const nlohmann::json* p = find(name);
        if (!p) throw ConfigError(path_ + "." + name, "missing required key");
        return *p;
    }

    double number(const std::string& name) { return as_number(require(name), name); }

    double number_or(const std::string& name, double def) {
        const nlohmann::json* p = find(name);
        return p ? as_number(*p, name) : def;
    }

    long integer(const std::string& name) { return as_integer(require(name), name); }

    long integer_or(const std::string& name, long def) {
        const nlohmann::json* p = find(name);
        return p ? as_integer(*p, name) : def;
    }

    std::string str(const std::string& name) { return as_str(require(name), name); }

    std::string str_or(const std::string& name, const std::string& def) {
        const nlohmann::json* p = find(name);
        return p ? as_str(*p, name) : def;
    }

    bool flag_or(const std::string& name, bool def) {
        const nlohmann::json* p = find(name);
        if (!p) return def;
        if (!p->is_boolean()) throw ConfigError(path_ + "." + name, "expected a boolean");
        return p->get<bool>();
    }

    std::vector<double> numbers_or(const std::string& name) {
        const nlohmann::json* p = find(name);
        std::vector<double> out;
        if (!p) return out;
        if (!p->is_array()) throw ConfigError(path_ + "." + name, "expected an array of numbers");
        for (const auto& x : *p) {
            if (!x.is_number()) throw ConfigError(path_ + "." + name, "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                throw ConfigError(path_ + "." + item.key(), "unknown key");
    }

private:
    double as_number(const nlohmann::json& v, const std::string& name) const {
        if (!v.is_number()) throw ConfigError(path_ + "." + name, "expected a number");
        return v.get<double>();
    }
    long as_integer(const nlohmann::json& v, const std::string& name) const {
        if (!v.is_number_integer()) throw ConfigError(path_ + "." + name, "expected an integer");
        return v.get<long>();
    }
    std::string as_str(const nlohmann::json& v, const std::string& name) const {
        if (!v.is_string()) throw ConfigError(path_ + "." + name, "expected a string");
        return v.get<std::string>();
    }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline const std::set<std::string>& known_scenarios() {
    static const std::set<std::string> ids = {"equilibrium", "thermal-decay", "buoyant-cell",
                                              "uniqueness-pair", "from-files"};
    return ids;
}

inline void validate_config(const RunConfig& c) {
    if (!(c.physics.kappa > 0.0)) throw ConfigError("physics.kappa", "must be positive");
    if (!(c.physics.mu > 0.0)) throw ConfigError("physics.mu", "must be positive");
    if (!(c.physics.lambda > 0.0))
        throw ConfigError("physics.lambda", "must be positive (the non-local condition requires lambda > 0)");
    if (!std::isfinite(c.physics.a)) throw ConfigError("physics.a", "must be finite");
    try {
        Mesh probe(c.nx);
    } catch (const StructuralError& e) {
        throw ConfigError("mesh.nx", e.what());
    }
    if (c.basis_n < 0) throw ConfigError("basis.N", "must be >= 0");
    if (c.basis_n > 0) {
        if (c.nx > kMaxBasisMeshNx)
            throw ConfigError("basis.N", "velocity runs are capped at nx <= " +
                                             std::to_string(kMaxBasisMeshNx));
        int dim = (c.nx - 1) * (c.nx - 1);
        if (c.basis_n > dim)
            throw ConfigError("basis.N", "exceeds the solenoidal dimension " + std::to_string(dim));
    }
    if (!(c.dt > 0.0)) throw ConfigError("time.dt", "must be positive");
    if (!(c.t_end >= c.dt)) throw ConfigError("time.t_end", "must be >= dt");
    long n = std::llround(c.t_end / c.dt);
    if (std::abs(static_cast<double>(n) * c.dt - c.t_end) > 1e-9 * c.t_end)
        throw ConfigError("time.t_end", "must be an integer multiple of dt");
    if (c.output_every < 1) throw ConfigError("time.output_every", "must be >= 1");
    if (!known_scenarios().count(c.scenario_id)) {
        std::string ids;
        for (const auto& s : known_scenarios()) ids += (ids.empty() ? "" : ", ") + s;
        throw ConfigError("scenario.id", "unknown scenario '" + c.scenario_id +
                                             "' (known: " + ids + ")");
    }
    if (c.scenario_potential != "none") potential_from_name(c.scenario_potential);
    if (c.physics.a != 0.0 && c.scenario_potential == "none")
        throw ConfigError("physics.a", "a != 0 requires a scenario.potential");
    if (c.scenario_id == "from-files" && (c.theta0_file.empty() || c.theta_b_file.empty()))
        throw ConfigError("scenario.theta0_file",
                          "from-files needs scenario.theta0_file and scenario.theta_b_file");
    if (!std::isfinite(c.scenario_t_b) || !std::isfinite(c.scenario_amplitude) ||
        !std::isfinite(c.scenario_epsilon))
        throw ConfigError("scenario", "non-finite scenario parameter");
    if (static_cast<int>(c.c0.size()) > c.basis_n)
        throw ConfigError("scenario.c0", "more coefficients than basis.N");
    for (double x : c.c0)
        if (!std::isfinite(x)) throw ConfigError("scenario.c0", "non-finite coefficient");
    if (c.splitting != "heat-first" && c.splitting != "momentum-first")
        throw ConfigError("splitting", "expected 'heat-first' or 'momentum-first'");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::StrictObject root(j, "(root)");

    detail::StrictObject mesh(root.require("mesh"), "mesh");
    c.nx = static_cast<int>(mesh.integer("nx"));
    mesh.finish();

    detail::StrictObject phys(root.require("physics"), "physics");
    c.physics.mu = phys.number("mu");
    c.physics.kappa = phys.number("kappa");
    c.physics.lambda = phys.number("lambda");
    c.physics.a = phys.number_or("a", 0.0);
    phys.finish();

    if (const nlohmann::json* b = root.find("basis")) {
        detail::StrictObject basis(*b, "basis");
        c.basis_n = static_cast<int>(basis.integer_or("N", 0));
        c.basis_cache = basis.str_or("cache_dir", "");
        basis.finish();
    }

    detail::StrictObject time(root.require("time"), "time");
    c.dt = time.number("dt");
    c.t_end = time.number("t_end");
    c.output_every = time.integer_or("output_every", 1);
    time.finish();

    detail::StrictObject sc(root.require("scenario"), "scenario");
    c.scenario_id = sc.str("id");
    c.scenario_t_b = sc.number_or("t_b", 2.0);
    c.scenario_amplitude = sc.number_or("amplitude", 1.0);
    c.scenario_epsilon = sc.number_or("epsilon", 1e-3);
    c.scenario_potential =
        sc.str_or("potential", c.scenario_id == "buoyant-cell" ? "linear-y" : "none");
    c.theta0_file = sc.str_or("theta0_file", "");
    c.theta_b_file = sc.str_or("theta_b_file", "");
    c.c0 = sc.numbers_or("c0");
    sc.finish();

    if (const nlohmann::json* o = root.find("output")) {
        detail::StrictObject out(*o, "output");
        c.out_dir = out.str_or("dir", "");
        c.out_fields = out.flag_or("fields", true);
        out.finish();
    }

    if (const nlohmann::json* s = root.find("splitting")) {
        if (!s->is_string()) throw ConfigError("splitting", "expected a string");
        c.splitting = s->get<std::string>();
    }
    root.finish();

    validate_config(c);
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["mesh"]["nx"] = c.nx;
    j["physics"]["mu"] = c.physics.mu;
    j["physics"]["kappa"] = c.physics.kappa;
    j["physics"]["lambda"] = c.physics.lambda;
    j["physics"]["a"] = c.physics.a;
    j["basis"]["N"] = c.basis_n;
    j["basis"]["cache_dir"] = c.basis_cache;
    j["time"]["dt"] = c.dt;
    j["time"]["t_end"] = c.t_end;
    j["time"]["output_every"] = c.output_every;
    j["scenario"]["id"] = c.scenario_id;
    j["scenario"]["t_b"] = c.scenario_t_b;
    j["scenario"]["amplitude"] = c.scenario_amplitude;
    j["scenario"]["epsilon"] = c.scenario_epsilon;
    j["scenario"]["potential"] = c.scenario_potential;
    j["scenario"]["theta0_file"] = c.theta0_file;
    j["scenario"]["theta_b_file"] = c.theta_b_file;
    j["scenario"]["c0"] = c.c0;
    j["output"]["dir"] = c.out_dir;
    j["output"]["fields"] = c.out_fields;
    j["splitting"] = c.splitting;
    return j;
}

/// Canonical textual form: sorted keys, two-space indent, trailing newline.
inline std::string echo_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("(json)", e.what());
    }
    return config_from_json(j);
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("(config)", "cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

}  // namespace nlb
