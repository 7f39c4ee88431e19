#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capmeter/config.hpp"
#include "capmeter/diagnosis.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPhysics = 3;
constexpr int kExitCalibration = 4;

using capmeter::Abacus;
using capmeter::AnalogBitmap;
using capmeter::CellMatrix;
using capmeter::ConverterParams;
using capmeter::RunConfig;

std::string format_fixed(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw capmeter::ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

Abacus load_abacus(const std::string& path, const ConverterParams& params,
                   const capmeter::ParasiticConfig& parasitics) {
    std::ifstream in(path);
    if (!in) throw capmeter::ConfigError("cannot open abacus file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw capmeter::ConfigError("abacus file '" + path + "' is not valid JSON: " + e.what());
    }
    Abacus abacus = capmeter::abacus_from_json(doc);
    std::string current = capmeter::params_fingerprint(params, parasitics);
    if (abacus.fingerprint() != current)
        throw capmeter::FingerprintError(
            "abacus fingerprint " + abacus.fingerprint() + " does not match config " + current +
            "; rerun calibrate");
    return abacus;
}

nlohmann::json state_to_json(const capmeter::Netlist& netlist,
                             const capmeter::CircuitState& state) {
    nlohmann::json doc;
    doc["time_ns"] = state.time_ns;
    nlohmann::json volts;
    for (int n = 0; n < netlist.node_count(); ++n)
        volts[netlist.node_names()[n]] = state.node_voltage_V[n];
    doc["node_voltage_V"] = std::move(volts);
    nlohmann::json charges;
    for (size_t k = 0; k < netlist.capacitors().size(); ++k) {
        const auto& cap = netlist.capacitors()[k];
        std::string key = cap.label.empty() ? "cap" + std::to_string(k) : cap.label;
        charges[key] = state.cap_charge_fC[k];
    }
    doc["cap_charge_fC"] = std::move(charges);
    return doc;
}

int cmd_calibrate(const RunConfig& config, const std::filesystem::path& out_dir) {
    ConverterParams params = capmeter::resolved_params(config);
    Abacus abacus = capmeter::build_abacus(params, config.sweep, config.parasitics);
    capmeter::AccuracyReport report = capmeter::accuracy_report(abacus);

    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "abacus.csv", capmeter::abacus_to_csv(abacus));
    write_file(out_dir / "abacus.json",
               capmeter::abacus_to_json(abacus, params, config.parasitics).dump(2) + "\n");
    write_file(out_dir / "accuracy.json", capmeter::accuracy_to_json(report).dump(2) + "\n");

    if (abacus.bins().size() <= 1)
        std::cerr << "warning: the sweep never left step " << abacus.bins().front().step
                  << "; the abacus has a single bin\n";

    std::cout << "abacus: " << abacus.bins().size() << " bins over ["
              << format_fixed(abacus.sweep().c_min_fF) << ", "
              << format_fixed(abacus.sweep().c_max_fF) << "] fF\n"
              << "delta_i_uA: " << format_fixed(params.delta_i_uA) << "\n"
              << "fingerprint: " << abacus.fingerprint() << "\n"
              << "max full-scale error: " << format_fixed(report.max_full_scale_error * 100.0)
              << " %\n"
              << "median full-scale error: "
              << format_fixed(report.median_full_scale_error * 100.0) << " %\n"
              << "max relative error: " << format_fixed(report.max_rel_error * 100.0) << " %\n"
              << "median relative error: " << format_fixed(report.median_rel_error * 100.0)
              << " %\n"
              << "wrote abacus.csv, abacus.json, accuracy.json\n";
    return 0;
}

int cmd_measure(const RunConfig& config, int row, int col, const std::string& abacus_path,
                const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
                bool trace) {
    ConverterParams params = capmeter::resolved_params(config);
    Abacus abacus = load_abacus(abacus_path, params, config.parasitics);
    CellMatrix cells = capmeter::make_cells(config, seed);
    if (row < 0 || row >= cells.rows() || col < 0 || col >= cells.cols())
        throw capmeter::ConfigError("cell (" + std::to_string(row) + "," + std::to_string(col) +
                                    ") is outside the " + std::to_string(cells.rows()) + "x" +
                                    std::to_string(cells.cols()) + " array");

    capmeter::MacroCell macro =
        capmeter::build_macro_cell(cells, config.parasitics, params.c_ref_fF);
    capmeter::MeasureOptions options;
    options.keep_trace = trace;
    capmeter::CellMeasurement m = capmeter::measure_cell(macro, row, col, params, options);
    capmeter::Diagnosis diag = capmeter::classify(m.conversion.step, abacus);

    std::cout << "cell: (" << row << "," << col << ")\n"
              << "step: " << m.conversion.step << "\n"
              << "v_gs_V: " << format_fixed(m.outcome.v_gs_V) << "\n";
    if (diag.estimate.point_fF)
        std::cout << "cap_est_fF: " << format_fixed(*diag.estimate.point_fF) << "\n";
    std::cout << "cap_lo_fF: " << format_fixed(diag.estimate.lo_fF) << "\n";
    if (diag.estimate.hi_fF)
        std::cout << "cap_hi_fF: " << format_fixed(*diag.estimate.hi_fF) << "\n";
    std::cout << "diagnosis: " << capmeter::diagnosis_label_name(diag.label) << "\n"
              << "sim_time_ns: " << format_fixed(m.elapsed_ns) << "\n";
    if (!m.outcome.conflict_phases.empty()) {
        std::cout << "rail_conflict_phases:";
        for (int p : m.outcome.conflict_phases) std::cout << " " << p;
        std::cout << "\n";
    }

    if (trace) {
        std::filesystem::create_directories(out_dir);
        nlohmann::json doc;
        doc["cell"] = {{"row", row}, {"col", col}};
        auto phases = nlohmann::json::array();
        for (const auto& state : *m.outcome.trace)
            phases.push_back(state_to_json(macro.netlist, state));
        doc["phases"] = std::move(phases);
        doc["v_ds_ramp_V"] = *m.conversion.v_ds_trace_V;
        doc["step"] = m.conversion.step;
        write_file(out_dir / "trace.json", doc.dump(2) + "\n");
        std::cout << "wrote trace.json\n";
    }
    return 0;
}

int cmd_scan(const RunConfig& config, const std::string& abacus_path,
             const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
             bool matrix) {
    ConverterParams params = capmeter::resolved_params(config);
    Abacus abacus = load_abacus(abacus_path, params, config.parasitics);
    CellMatrix cells = capmeter::make_cells(config, seed);
    AnalogBitmap bitmap = capmeter::scan_array(cells, config.parasitics, params, abacus);
    capmeter::Histogram hist =
        capmeter::signature_histogram(bitmap, config.histogram_bin_fF);

    std::string csv = "row,col,step,cap_est_fF,cap_lo_fF,cap_hi_fF,diagnosis\n";
    for (const auto& rec : bitmap.cells) {
        csv += std::to_string(rec.row) + "," + std::to_string(rec.col) + "," +
               std::to_string(rec.step) + ",";
        if (rec.estimate_fF) csv += format_fixed(*rec.estimate_fF);
        csv += ",";
        csv += format_fixed(rec.interval_lo_fF);
        csv += ",";
        if (rec.interval_hi_fF) csv += format_fixed(*rec.interval_hi_fF);
        csv += ",";
        csv += capmeter::diagnosis_label_name(rec.label);
        csv += "\n";
    }

    nlohmann::json summary;
    summary["rows"] = bitmap.rows;
    summary["cols"] = bitmap.cols;
    summary["in_range"] = bitmap.in_range;
    summary["under_range_short_open"] = bitmap.under_range;
    summary["over_range"] = bitmap.over_range;
    summary["total_sim_time_ns"] = bitmap.total_sim_time_ns;
    summary["abacus_fingerprint"] = bitmap.abacus_fingerprint;
    nlohmann::json steps;
    for (const auto& [step, count] : bitmap.step_counts)
        steps[std::to_string(step)] = count;
    summary["step_counts"] = std::move(steps);
    nlohmann::json hj;
    hj["bin_width_fF"] = hist.bin_width_fF;
    hj["origin_fF"] = hist.origin_fF;
    nlohmann::json buckets;
    for (const auto& [bucket, count] : hist.buckets) {
        double lo = hist.origin_fF + bucket * hist.bin_width_fF;
        char key[64];
        std::snprintf(key, sizeof key, "[%.2f,%.2f)", lo, lo + hist.bin_width_fF);
        buckets[key] = count;
    }
    hj["buckets"] = std::move(buckets);
    hj["under_range"] = hist.under_range;
    hj["over_range"] = hist.over_range;
    summary["histogram"] = std::move(hj);

    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "bitmap.csv", csv);
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    if (matrix) {
        std::string dat;
        for (int r = 0; r < bitmap.rows; ++r) {
            for (int c = 0; c < bitmap.cols; ++c) {
                const auto& rec = bitmap.at(r, c);
                if (c) dat += " ";
                dat += rec.estimate_fF ? format_fixed(*rec.estimate_fF) : "nan";
            }
            dat += "\n";
        }
        write_file(out_dir / "estimates.dat", dat);
    }

    std::cout << "scanned " << bitmap.rows << "x" << bitmap.cols << " cells\n"
              << "in_range: " << bitmap.in_range
              << "  under_range_short_open: " << bitmap.under_range
              << "  over_range: " << bitmap.over_range << "\n"
              << "total_sim_time_ns: " << format_fixed(bitmap.total_sim_time_ns) << "\n"
              << "wrote bitmap.csv, summary.json" << (matrix ? ", estimates.dat" : "") << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Switch-level simulator of an in-array capacitor measurement structure"};
    app.require_subcommand(1);

    std::string config_path;
    std::string abacus_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool trace = false;
    bool matrix = false;
    int row = 0;
    int col = 0;

    auto add_common = [&](CLI::App* sub, bool need_abacus) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        auto* ab = sub->add_option("--abacus", abacus_path, "calibrated abacus JSON");
        if (need_abacus) ab->required();
        sub->add_option("--out", out_dir, "output directory (default .)");
        sub->add_option("--seed", seed, "override the random-cell seed");
    };

    CLI::App* calibrate = app.add_subcommand("calibrate", "sweep the abacus and report accuracy");
    add_common(calibrate, false);

    CLI::App* measure = app.add_subcommand("measure", "measure one cell");
    add_common(measure, true);
    measure->add_option("--row", row, "cell row")->required();
    measure->add_option("--col", col, "cell column")->required();
    measure->add_flag("--trace", trace, "dump per-phase node voltages and the ramp to trace.json");

    CLI::App* scan = app.add_subcommand("scan", "measure every cell into a bitmap");
    add_common(scan, true);
    scan->add_flag("--matrix", matrix, "also write a gnuplot matrix of estimates");
    scan->add_flag("--trace", trace, "accepted for symmetry; scans do not dump traces");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        RunConfig config = capmeter::load_config(config_path);
        if (calibrate->parsed()) return cmd_calibrate(config, out_dir);
        if (measure->parsed())
            return cmd_measure(config, row, col, abacus_path, out_dir, seed, trace);
        return cmd_scan(config, abacus_path, out_dir, seed, matrix);
    } catch (const capmeter::CalibrationError& e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return kExitCalibration;
    } catch (const capmeter::CircuitError& e) {
        std::cerr << "physics error: " << e.what() << "\n";
        return kExitPhysics;
    } catch (const capmeter::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
