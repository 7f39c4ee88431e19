#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capmeter/calibration.hpp"
#include "capmeter/converter.hpp"
#include "capmeter/macro_cell.hpp"

namespace capmeter {

enum class CellMode { uniform, matrix, random };

struct CellSpec {
    CellMode mode = CellMode::uniform;
    double value_fF = 30.0;              // uniform
    std::vector<double> values_fF;       // matrix, row major
    std::uint64_t seed = 1;              // random
    std::string dist = "normal";         // "normal" or "uniform"
    double mean_fF = 30.0;
    double sigma_fF = 2.0;
};

struct RunConfig {
    int rows = 4;
    int cols = 4;
    CellSpec cells;
    ParasiticConfig parasitics;
    ConverterParams converter; // delta_i_uA 0 with delta_i_auto: sized from the sweep top
    bool delta_i_auto = true;
    SweepSpec sweep;
    std::vector<FaultSpec> faults;
    double histogram_bin_fF = 5.0;
    std::string out_dir = ".";
};

RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path); // throws ConfigError

// Converter params with delta_i resolved (auto-sized against the sweep
// top through the real acquisition flow when requested).
ConverterParams resolved_params(const RunConfig& config);

// Cell values per the config source; the seed override (CLI --seed)
// replaces the config seed for random mode. Faults are applied on top.
CellMatrix make_cells(const RunConfig& config,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

nlohmann::json converter_to_json(const ConverterParams& params);
ConverterParams converter_from_json(const nlohmann::json& doc);
nlohmann::json parasitics_to_json(const ParasiticConfig& parasitics);
ParasiticConfig parasitics_from_json(const nlohmann::json& doc);

} // namespace capmeter
