#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vibro/sim.hpp"

namespace vibro {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The drive frequencies the experiment grid uses.
inline constexpr std::array<double, 8> kDriveFrequencies{20.0, 31.0, 47.0, 72.0,
                                                         111.0, 170.0, 261.0, 400.0};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline double num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j[key].get<double>();
}

inline PiecewiseLinear profile(const json& j, const char* key, const PiecewiseLinear& fallback,
                               const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& p = j[key];
    if (p.is_number()) return PiecewiseLinear(p.get<double>());
    if (!p.is_object() || !p.contains("t") || !p.contains("v"))
        throw ConfigError("profile '" + std::string(key) + "' in " + where +
                          " must be a number or {\"t\": [...], \"v\": [...]}");
    require_keys(p, {"t", "v"}, where + "." + key);
    try {
        return PiecewiseLinear(p["t"].get<std::vector<double>>(), p["v"].get<std::vector<double>>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError("profile '" + std::string(key) + "': " + e.what());
    }
}

} // namespace detail

/// Parse and validate a scenario description. Unknown keys are rejected so
/// a typo never silently falls back to a default.
inline SimConfig parse_scenario(const nlohmann::json& j) {
    using detail::num;
    detail::require_keys(
        j, {"seed", "duration_s", "sensor_sigma_m", "drive", "plate", "finger"}, "scenario");

    SimConfig cfg;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    cfg.duration_s = num(j, "duration_s", cfg.duration_s);
    cfg.sensor_sigma_m = num(j, "sensor_sigma_m", cfg.sensor_sigma_m);

    if (j.contains("drive")) {
        const auto& d = j["drive"];
        detail::require_keys(d,
                             {"f_hz", "a_ref_m", "phase_control", "amp_bandwidth_hz",
                              "phase_bandwidth_hz", "lockin_cutoff_hz"},
                             "drive");
        cfg.drive.f_hz = num(d, "f_hz", cfg.drive.f_hz);
        cfg.drive.a_ref_m = num(d, "a_ref_m", cfg.drive.a_ref_m);
        if (d.contains("phase_control")) cfg.drive.phase_control = d["phase_control"].get<bool>();
        cfg.drive.amp_bandwidth_hz = num(d, "amp_bandwidth_hz", cfg.drive.amp_bandwidth_hz);
        cfg.drive.phase_bandwidth_hz = num(d, "phase_bandwidth_hz", cfg.drive.phase_bandwidth_hz);
        cfg.drive.lockin_cutoff_hz = num(d, "lockin_cutoff_hz", cfg.drive.lockin_cutoff_hz);
    }
    bool on_grid = false;
    for (double f : kDriveFrequencies) on_grid |= std::abs(cfg.drive.f_hz - f) < 1e-9;
    if (!on_grid)
        throw ConfigError("drive.f_hz must be one of the experiment grid frequencies "
                          "{20, 31, 47, 72, 111, 170, 261, 400}");

    if (j.contains("plate")) {
        const auto& p = j["plate"];
        detail::require_keys(p,
                             {"mass_kg", "inertia", "force_constant_n_per_a", "k1_n_per_m",
                              "k2_n_per_m", "b1_ns_per_m", "b2_ns_per_m", "spacing_m", "drift"},
                             "plate");
        cfg.plate.mass_kg = num(p, "mass_kg", cfg.plate.mass_kg);
        cfg.plate.inertia = num(p, "inertia", cfg.plate.inertia);
        cfg.plate.force_constant_n_per_a = num(p, "force_constant_n_per_a", cfg.plate.force_constant_n_per_a);
        cfg.plate.k1_n_per_m = num(p, "k1_n_per_m", cfg.plate.k1_n_per_m);
        cfg.plate.k2_n_per_m = num(p, "k2_n_per_m", cfg.plate.k2_n_per_m);
        cfg.plate.b1_ns_per_m = num(p, "b1_ns_per_m", cfg.plate.b1_ns_per_m);
        cfg.plate.b2_ns_per_m = num(p, "b2_ns_per_m", cfg.plate.b2_ns_per_m);
        cfg.plate.spacing_m = num(p, "spacing_m", cfg.plate.spacing_m);
        if (p.contains("drift")) {
            const auto& dr = p["drift"];
            detail::require_keys(dr, {"k1", "k2", "b1", "b2"}, "plate.drift");
            cfg.plate.drift_k1 = num(dr, "k1", 0.0);
            cfg.plate.drift_k2 = num(dr, "k2", 0.0);
            cfg.plate.drift_b1 = num(dr, "b1", 0.0);
            cfg.plate.drift_b2 = num(dr, "b2", 0.0);
        }
    }

    if (j.contains("finger")) {
        const auto& f = j["finger"];
        detail::require_keys(f, {"model", "preset", "params", "scaling", "windows", "load_n", "position_m"},
                             "finger");
        const std::string model = f.contains("model") ? f["model"].get<std::string>() : "none";
        if (model == "none") {
            cfg.touch.finger.model = std::monostate{};
        } else if (model == "order2") {
            if (f.contains("params")) {
                const auto& q = f["params"];
                detail::require_keys(q, {"m", "b", "k"}, "finger.params");
                cfg.touch.finger.model = Order2Params{num(q, "m", 0.0), num(q, "b", 0.0), num(q, "k", 0.0)};
            } else {
                cfg.touch.finger.model =
                    preset_order2(f.contains("preset") ? f["preset"].get<std::string>() : "w_gt_0.5");
            }
        } else if (model == "order4") {
            if (f.contains("params")) {
                const auto& q = f["params"];
                detail::require_keys(q, {"mp", "bp", "kp", "ms", "bs", "ks"}, "finger.params");
                cfg.touch.finger.model =
                    Order4Params{num(q, "mp", 0.0), num(q, "bp", 0.0), num(q, "kp", 0.0),
                                 num(q, "ms", 0.0), num(q, "bs", 0.0), num(q, "ks", 0.0)};
            } else {
                cfg.touch.finger.model =
                    preset_order4(f.contains("preset") ? f["preset"].get<std::string>() : "w_lt_0.5");
            }
        } else {
            throw ConfigError("finger.model must be none, order2 or order4");
        }
        if (f.contains("scaling")) {
            const auto& s = f["scaling"];
            detail::require_keys(s, {"mode", "gamma", "w_ref"}, "finger.scaling");
            const std::string mode = s.contains("mode") ? s["mode"].get<std::string>() : "none";
            if (mode == "none") cfg.touch.finger.scaling.mode = SkinScaling::Mode::None;
            else if (mode == "table_linear") cfg.touch.finger.scaling.mode = SkinScaling::Mode::TableLinear;
            else if (mode == "power_law") cfg.touch.finger.scaling.mode = SkinScaling::Mode::PowerLaw;
            else throw ConfigError("finger.scaling.mode must be none, table_linear or power_law");
            cfg.touch.finger.scaling.gamma = num(s, "gamma", cfg.touch.finger.scaling.gamma);
            cfg.touch.finger.scaling.w_ref = num(s, "w_ref", cfg.touch.finger.scaling.w_ref);
        }
        if (f.contains("windows")) {
            for (const auto& w : f["windows"]) {
                detail::require_keys(w, {"t_on", "t_off"}, "finger.windows[]");
                cfg.touch.windows.push_back({num(w, "t_on", 0.0), num(w, "t_off", 0.0)});
            }
        }
        cfg.touch.load_n = detail::profile(f, "load_n", cfg.touch.load_n, "finger");
        cfg.touch.position_m = detail::profile(f, "position_m", cfg.touch.position_m, "finger");
    }

    cfg.validate();
    return cfg;
}

inline SimConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario file: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scenario file is not valid JSON: " + std::string(e.what()));
    }
    try {
        return parse_scenario(j);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid scenario: ") + e.what());
    }
}

} // namespace vibro
