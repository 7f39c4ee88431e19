#include "capmeter/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double require_number(const nlohmann::json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return obj[key].get<double>();
}

// Cross-library reproducibility: the distribution mappings are spelled
// out here instead of using std::*_distribution, whose algorithms differ
// between standard libraries.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

double standard_normal(std::mt19937_64& rng) {
    double u1 = unit_uniform(rng);
    double u2 = unit_uniform(rng);
    if (u1 <= 0.0) u1 = 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> dims_to_flat(const nlohmann::json& values, int rows, int cols) {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(rows) * cols);
    if (!values.is_array() || values.empty())
        throw ConfigError("'values_fF' must be a non-empty array");
    if (values[0].is_array()) {
        if (static_cast<int>(values.size()) != rows)
            throw ConfigError("'values_fF' row count does not match the array");
        for (const auto& row : values) {
            if (!row.is_array() || static_cast<int>(row.size()) != cols)
                throw ConfigError("'values_fF' column count does not match the array");
            for (const auto& v : row) flat.push_back(v.get<double>());
        }
    } else {
        if (static_cast<int>(values.size()) != rows * cols)
            throw ConfigError("'values_fF' must hold rows*cols values");
        for (const auto& v : values) flat.push_back(v.get<double>());
    }
    return flat;
}

std::vector<double> parasitic_list(const nlohmann::json& v, const char* key) {
    std::vector<double> out;
    if (v.is_number()) {
        double x = v.get<double>();
        if (x != 0.0) out.push_back(x);
        return out;
    }
    if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be a number or array");
    for (const auto& item : v) out.push_back(item.get<double>());
    return out;
}

} // namespace

ParasiticConfig parasitics_from_json(const nlohmann::json& doc) {
    ParasiticConfig p;
    if (doc.is_null()) return p;
    if (!doc.is_object()) throw ConfigError("'parasitics' must be an object");
    check_keys(doc, {"plate_fF", "bitline_fF", "storage_fF"}, "parasitics");
    p.plate_fF = require_number(doc, "plate_fF", 0.0);
    if (doc.contains("bitline_fF")) p.bitline_fF = parasitic_list(doc["bitline_fF"], "bitline_fF");
    if (doc.contains("storage_fF")) p.storage_fF = parasitic_list(doc["storage_fF"], "storage_fF");
    return p;
}

nlohmann::json parasitics_to_json(const ParasiticConfig& p) {
    return {{"plate_fF", p.plate_fF}, {"bitline_fF", p.bitline_fF}, {"storage_fF", p.storage_fF}};
}

ConverterParams converter_from_json(const nlohmann::json& doc) {
    ConverterParams p;
    p.delta_i_uA = 0.0;
    if (doc.is_null()) return p;
    if (!doc.is_object()) throw ConfigError("'converter' must be an object");
    check_keys(doc,
               {"c_ref_fF", "v_dd_V", "v_t_V", "k_uA_per_V2", "delta_i_uA", "n_steps",
                "inverter_threshold_V"},
               "converter");
    p.c_ref_fF = require_number(doc, "c_ref_fF", p.c_ref_fF);
    p.v_dd_V = require_number(doc, "v_dd_V", p.v_dd_V);
    p.v_t_V = require_number(doc, "v_t_V", p.v_t_V);
    p.k_uA_per_V2 = require_number(doc, "k_uA_per_V2", p.k_uA_per_V2);
    if (doc.contains("n_steps")) {
        if (!doc["n_steps"].is_number_integer())
            throw ConfigError("'n_steps' must be an integer");
        p.n_steps = doc["n_steps"].get<int>();
    }
    p.inverter_threshold_V = require_number(doc, "inverter_threshold_V", p.v_dd_V / 2.0);
    if (doc.contains("delta_i_uA") && !doc["delta_i_uA"].is_string())
        p.delta_i_uA = doc["delta_i_uA"].get<double>();
    else if (doc.contains("delta_i_uA") && doc["delta_i_uA"].get<std::string>() != "auto")
        throw ConfigError("'delta_i_uA' must be a number or \"auto\"");
    return p;
}

nlohmann::json converter_to_json(const ConverterParams& p) {
    return {{"c_ref_fF", p.c_ref_fF},
            {"v_dd_V", p.v_dd_V},
            {"v_t_V", p.v_t_V},
            {"k_uA_per_V2", p.k_uA_per_V2},
            {"delta_i_uA", p.delta_i_uA},
            {"n_steps", p.n_steps},
            {"inverter_threshold_V", p.inverter_threshold_V}};
}

RunConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(doc,
               {"array", "cells", "parasitics", "converter", "sweep", "faults",
                "histogram_bin_fF", "out_dir"},
               "config");

    RunConfig cfg;
    if (doc.contains("array")) {
        const auto& a = doc["array"];
        check_keys(a, {"rows", "cols"}, "array");
        if (!a.contains("rows") || !a.contains("cols") || !a["rows"].is_number_integer() ||
            !a["cols"].is_number_integer())
            throw ConfigError("'array' needs integer 'rows' and 'cols'");
        cfg.rows = a["rows"].get<int>();
        cfg.cols = a["cols"].get<int>();
    }
    if (cfg.rows < 1 || cfg.cols < 1) throw ConfigError("array must be at least 1x1");

    if (doc.contains("cells")) {
        const auto& c = doc["cells"];
        check_keys(c, {"mode", "value_fF", "values_fF", "seed", "dist", "mean_fF", "sigma_fF"},
                   "cells");
        std::string mode = c.value("mode", "uniform");
        if (mode == "uniform") {
            cfg.cells.mode = CellMode::uniform;
            cfg.cells.value_fF = require_number(c, "value_fF", cfg.cells.value_fF);
        } else if (mode == "matrix") {
            cfg.cells.mode = CellMode::matrix;
            if (!c.contains("values_fF")) throw ConfigError("matrix mode needs 'values_fF'");
            cfg.cells.values_fF = dims_to_flat(c["values_fF"], cfg.rows, cfg.cols);
        } else if (mode == "random") {
            cfg.cells.mode = CellMode::random;
            if (c.contains("seed")) cfg.cells.seed = c["seed"].get<std::uint64_t>();
            cfg.cells.dist = c.value("dist", cfg.cells.dist);
            if (cfg.cells.dist != "normal" && cfg.cells.dist != "uniform")
                throw ConfigError("'dist' must be \"normal\" or \"uniform\"");
            cfg.cells.mean_fF = require_number(c, "mean_fF", cfg.cells.mean_fF);
            cfg.cells.sigma_fF = require_number(c, "sigma_fF", cfg.cells.sigma_fF);
            if (cfg.cells.sigma_fF < 0.0) throw ConfigError("'sigma_fF' must be >= 0");
        } else {
            throw ConfigError("unknown cell mode '" + mode + "'");
        }
    }

    cfg.parasitics = parasitics_from_json(doc.value("parasitics", nlohmann::json{}));
    cfg.parasitics.validate(cfg.rows, cfg.cols);

    if (doc.contains("converter")) {
        cfg.converter = converter_from_json(doc["converter"]);
        cfg.delta_i_auto = cfg.converter.delta_i_uA == 0.0;
    }

    if (doc.contains("sweep")) {
        const auto& s = doc["sweep"];
        check_keys(s, {"c_min_fF", "c_max_fF", "resolution_fF"}, "sweep");
        cfg.sweep.c_min_fF = require_number(s, "c_min_fF", cfg.sweep.c_min_fF);
        cfg.sweep.c_max_fF = require_number(s, "c_max_fF", cfg.sweep.c_max_fF);
        cfg.sweep.resolution_fF = require_number(s, "resolution_fF", cfg.sweep.resolution_fF);
    }
    cfg.sweep.validate();

    for (const auto& f : doc.value("faults", nlohmann::json::array())) {
        check_keys(f, {"row", "col", "kind", "value_fF"}, "faults entry");
        FaultSpec spec;
        spec.row = f.at("row").get<int>();
        spec.col = f.at("col").get<int>();
        spec.kind = fault_kind_from_name(f.at("kind").get<std::string>());
        if (spec.kind == FaultKind::value_override) {
            if (!f.contains("value_fF"))
                throw ConfigError("fault kind \"value_override\" needs 'value_fF'");
            spec.value_fF = f["value_fF"].get<double>();
        } else if (f.contains("value_fF")) {
            throw ConfigError("'value_fF' only applies to fault kind \"value_override\"");
        }
        cfg.faults.push_back(spec);
    }

    cfg.histogram_bin_fF = require_number(doc, "histogram_bin_fF", cfg.histogram_bin_fF);
    if (!(cfg.histogram_bin_fF > 0.0)) throw ConfigError("'histogram_bin_fF' must be positive");
    if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return config_from_json(doc);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

ConverterParams resolved_params(const RunConfig& config) {
    if (!config.delta_i_auto) return config.converter;
    return auto_size_delta_i(config.converter, config.sweep.c_max_fF, config.parasitics);
}

CellMatrix make_cells(const RunConfig& config, std::optional<std::uint64_t> seed_override) {
    CellMatrix cells = [&]() -> CellMatrix {
        switch (config.cells.mode) {
        case CellMode::uniform:
            return CellMatrix(config.rows, config.cols, config.cells.value_fF);
        case CellMode::matrix:
            return CellMatrix(config.rows, config.cols, config.cells.values_fF);
        case CellMode::random: {
            std::mt19937_64 rng(seed_override.value_or(config.cells.seed));
            std::vector<double> values;
            values.reserve(static_cast<size_t>(config.rows) * config.cols);
            for (int i = 0; i < config.rows * config.cols; ++i) {
                double v;
                if (config.cells.dist == "uniform")
                    v = config.cells.mean_fF +
                        (2.0 * unit_uniform(rng) - 1.0) * config.cells.sigma_fF;
                else
                    v = config.cells.mean_fF + config.cells.sigma_fF * standard_normal(rng);
                values.push_back(std::max(0.0, v));
            }
            return CellMatrix(config.rows, config.cols, std::move(values));
        }
        }
        throw ConfigError("unreachable cell mode");
    }();
    for (const auto& fault : config.faults) cells.set_fault(fault);
    return cells;
}

} // namespace capmeter
