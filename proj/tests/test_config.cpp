#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "capmeter/config.hpp"
#include "capmeter/errors.hpp"

using namespace capmeter;
using nlohmann::json;

TEST_CASE("an empty config resolves to the documented defaults") {
    RunConfig cfg = config_from_json(json::object());
    CHECK(cfg.rows == 4);
    CHECK(cfg.cols == 4);
    CHECK(cfg.cells.mode == CellMode::uniform);
    CHECK(cfg.cells.value_fF == 30.0);
    CHECK(cfg.delta_i_auto);
    CHECK(cfg.sweep.c_min_fF == 10.0);
    CHECK(cfg.sweep.c_max_fF == 55.0);
    CHECK(cfg.histogram_bin_fF == 5.0);
    CHECK(cfg.faults.empty());
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"arrray": {}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"array": {"rows": 2, "cols": 2, "x": 1}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"cells": {"mode": "uniform", "typo": 1}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"sweep": {"c_min": 10}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"converter": {"vdd": 1.8}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"parasitics": {"plate": 1}})")), ConfigError);
    CHECK_THROWS_AS(
        config_from_json(json::parse(
            R"({"faults": [{"row": 0, "col": 0, "kind": "open", "extra": true}]})")),
        ConfigError);
}

TEST_CASE("array bounds and cell matrices are validated") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"array": {"rows": 0, "cols": 4}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"array": {"rows": 2}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"array": {"rows": 2.5, "cols": 2}})")),
                    ConfigError);

    RunConfig nested = config_from_json(json::parse(
        R"({"array": {"rows": 2, "cols": 2},
            "cells": {"mode": "matrix", "values_fF": [[1, 2], [3, 4]]}})"));
    CHECK(nested.cells.values_fF == std::vector<double>{1, 2, 3, 4});

    RunConfig flat = config_from_json(json::parse(
        R"({"array": {"rows": 2, "cols": 2},
            "cells": {"mode": "matrix", "values_fF": [1, 2, 3, 4]}})"));
    CHECK(flat.cells.values_fF == std::vector<double>{1, 2, 3, 4});

    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"array": {"rows": 2, "cols": 2},
                            "cells": {"mode": "matrix", "values_fF": [[1, 2], [3]]}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"array": {"rows": 2, "cols": 2},
                            "cells": {"mode": "matrix", "values_fF": [1, 2, 3]}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"cells": {"mode": "matrix"}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"cells": {"mode": "banana"}})")),
                    ConfigError);
}

TEST_CASE("random cells are seeded, clamped and reproducible") {
    RunConfig cfg = config_from_json(json::parse(
        R"({"array": {"rows": 8, "cols": 8},
            "cells": {"mode": "random", "seed": 42, "dist": "normal",
                      "mean_fF": 30, "sigma_fF": 4}})"));

    CellMatrix a = make_cells(cfg);
    CellMatrix b = make_cells(cfg);
    bool identical = true;
    bool varied = false;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            identical = identical && a.value_at(r, c) == b.value_at(r, c);
            varied = varied || a.value_at(r, c) != a.value_at(0, 0);
        }
    CHECK(identical);
    CHECK(varied);

    CellMatrix c = make_cells(cfg, 43);
    bool differs = false;
    for (int r = 0; r < 8 && !differs; ++r)
        for (int col = 0; col < 8; ++col)
            if (a.value_at(r, col) != c.value_at(r, col)) {
                differs = true;
                break;
            }
    CHECK(differs);

    RunConfig wild = cfg;
    wild.cells.mean_fF = 1.0;
    wild.cells.sigma_fF = 100.0;
    CellMatrix clamped = make_cells(wild);
    bool any_zero = false;
    for (int r = 0; r < 8; ++r)
        for (int col = 0; col < 8; ++col) {
            CHECK(clamped.value_at(r, col) >= 0.0);
            any_zero = any_zero || clamped.value_at(r, col) == 0.0;
        }
    CHECK(any_zero);

    RunConfig uni = cfg;
    uni.cells.dist = "uniform";
    CellMatrix u = make_cells(uni);
    for (int r = 0; r < 8; ++r)
        for (int col = 0; col < 8; ++col) {
            CHECK(u.value_at(r, col) >= 26.0);
            CHECK(u.value_at(r, col) <= 34.0);
        }

    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"cells": {"mode": "random", "dist": "poisson"}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"cells": {"mode": "random", "sigma_fF": -1}})")),
                    ConfigError);
}

TEST_CASE("fault entries follow the kind-specific value rule") {
    RunConfig cfg = config_from_json(json::parse(
        R"({"faults": [{"row": 0, "col": 1, "kind": "short"},
                       {"row": 1, "col": 0, "kind": "open"},
                       {"row": 2, "col": 2, "kind": "value_override", "value_fF": 7.5}]})"));
    REQUIRE(cfg.faults.size() == 3);
    CHECK(cfg.faults[0].kind == FaultKind::shorted);
    CHECK(cfg.faults[1].kind == FaultKind::open);
    CHECK(cfg.faults[2].kind == FaultKind::value_override);
    CHECK(cfg.faults[2].value_fF == 7.5);

    // alias kept for hand-written configs
    RunConfig alias = config_from_json(json::parse(
        R"({"faults": [{"row": 0, "col": 0, "kind": "shorted"}]})"));
    CHECK(alias.faults[0].kind == FaultKind::shorted);

    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"faults": [{"row": 0, "col": 0, "kind": "value_override"}]})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"faults": [{"row": 0, "col": 0, "kind": "open", "value_fF": 3}]})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"faults": [{"row": 0, "col": 0, "kind": "leaky"}]})")),
                    ConfigError);

    CellMatrix cells = make_cells(cfg);
    CHECK(cells.fault_at(0, 1) != nullptr);
    CHECK(cells.fault_at(2, 2)->value_fF == 7.5);
}

TEST_CASE("parasitics accept scalars or per-column arrays") {
    RunConfig scalar = config_from_json(json::parse(
        R"({"parasitics": {"plate_fF": 2, "bitline_fF": 1.5}})"));
    CHECK(scalar.parasitics.plate_fF == 2.0);
    CHECK(scalar.parasitics.bitline_fF == std::vector<double>{1.5});
    CHECK(scalar.parasitics.bitline_at(3) == 1.5); // uniform broadcast

    RunConfig zero = config_from_json(json::parse(R"({"parasitics": {"bitline_fF": 0}})"));
    CHECK(zero.parasitics.bitline_fF.empty());

    RunConfig per_col = config_from_json(json::parse(
        R"({"array": {"rows": 2, "cols": 3},
            "parasitics": {"bitline_fF": [1, 2, 3]}})"));
    CHECK(per_col.parasitics.bitline_at(2) == 3.0);

    CHECK_THROWS_AS(config_from_json(json::parse(
                        R"({"array": {"rows": 2, "cols": 4},
                            "parasitics": {"bitline_fF": [1, 2, 3]}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"parasitics": {"plate_fF": "big"}})")),
                    ConfigError);
}

TEST_CASE("the ramp step auto-sizes unless pinned in the config") {
    RunConfig autod = config_from_json(json::parse(R"({"converter": {"delta_i_uA": "auto"}})"));
    CHECK(autod.delta_i_auto);
    ConverterParams sized = resolved_params(autod);
    CHECK(sized.delta_i_uA == ConverterParams::defaults().delta_i_uA); // bit-identical

    RunConfig pinned = config_from_json(json::parse(R"({"converter": {"delta_i_uA": 2.5}})"));
    CHECK(!pinned.delta_i_auto);
    CHECK(resolved_params(pinned).delta_i_uA == 2.5);

    CHECK_THROWS_AS(config_from_json(json::parse(R"({"converter": {"delta_i_uA": "huge"}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"converter": {"n_steps": 2.5}})")),
                    ConfigError);

    RunConfig threshold = config_from_json(json::parse(R"({"converter": {"v_dd_V": 1.2}})"));
    CHECK(threshold.converter.inverter_threshold_V == 0.6); // tracks v_dd when unset
}

TEST_CASE("histogram width must be positive") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"histogram_bin_fF": 0})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"histogram_bin_fF": -3})")), ConfigError);
}

TEST_CASE("config files are read with real error messages") {
    CHECK_THROWS_AS(load_config("/nonexistent/capmeter.json"), ConfigError);

    const char* path = "capmeter_bad_config_test.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
    std::remove(path);

    const char* good = "capmeter_good_config_test.json";
    {
        std::ofstream out(good);
        out << R"({"array": {"rows": 2, "cols": 2}})";
    }
    RunConfig cfg = load_config(good);
    CHECK(cfg.rows == 2);
    std::remove(good);
}

TEST_CASE("converter and parasitic json round trips keep every field") {
    ConverterParams p = ConverterParams::defaults();
    ConverterParams q = converter_from_json(converter_to_json(p));
    CHECK(q.c_ref_fF == p.c_ref_fF);
    CHECK(q.v_dd_V == p.v_dd_V);
    CHECK(q.v_t_V == p.v_t_V);
    CHECK(q.k_uA_per_V2 == p.k_uA_per_V2);
    CHECK(q.delta_i_uA == p.delta_i_uA);
    CHECK(q.n_steps == p.n_steps);
    CHECK(q.inverter_threshold_V == p.inverter_threshold_V);

    ParasiticConfig par;
    par.plate_fF = 3.0;
    par.bitline_fF = {1.0, 2.0};
    par.storage_fF = {0.5};
    ParasiticConfig back = parasitics_from_json(parasitics_to_json(par));
    CHECK(back.plate_fF == par.plate_fF);
    CHECK(back.bitline_fF == par.bitline_fF);
    CHECK(back.storage_fF == par.storage_fF);
}
