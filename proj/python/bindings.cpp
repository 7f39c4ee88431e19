#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capmeter/calibration.hpp"
#include "capmeter/config.hpp"
#include "capmeter/converter.hpp"
#include "capmeter/diagnosis.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/macro_cell.hpp"
#include "capmeter/netlist.hpp"
#include "capmeter/pipeline.hpp"
#include "capmeter/protocol.hpp"

namespace py = pybind11;
using namespace capmeter;

namespace {

nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

} // namespace

PYBIND11_MODULE(_capmeter, m) {
    m.doc() = "Charge-sharing capacitor measurement simulator";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    auto circuit_error = py::register_exception<CircuitError>(m, "CircuitError", PyExc_RuntimeError);
    py::register_exception<SourceConflictError>(m, "SourceConflictError", circuit_error.ptr());
    auto calib_error =
        py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);
    py::register_exception<FingerprintError>(m, "FingerprintError", calib_error.ptr());

    py::class_<ConverterParams>(m, "ConverterParams")
        .def(py::init<>())
        .def_static("defaults", &ConverterParams::defaults)
        .def_readwrite("c_ref_fF", &ConverterParams::c_ref_fF)
        .def_readwrite("v_dd_V", &ConverterParams::v_dd_V)
        .def_readwrite("v_t_V", &ConverterParams::v_t_V)
        .def_readwrite("k_uA_per_V2", &ConverterParams::k_uA_per_V2)
        .def_readwrite("delta_i_uA", &ConverterParams::delta_i_uA)
        .def_readwrite("n_steps", &ConverterParams::n_steps)
        .def_readwrite("inverter_threshold_V", &ConverterParams::inverter_threshold_V)
        .def("validate", &ConverterParams::validate);

    py::class_<ParasiticConfig>(m, "ParasiticConfig")
        .def(py::init<>())
        .def_readwrite("plate_fF", &ParasiticConfig::plate_fF)
        .def_readwrite("bitline_fF", &ParasiticConfig::bitline_fF)
        .def_readwrite("storage_fF", &ParasiticConfig::storage_fF);

    py::enum_<FaultKind>(m, "FaultKind")
        .value("shorted", FaultKind::shorted)
        .value("open", FaultKind::open)
        .value("value_override", FaultKind::value_override);

    py::class_<FaultSpec>(m, "FaultSpec")
        .def(py::init([](int row, int col, FaultKind kind, double value_fF) {
                 return FaultSpec{row, col, kind, value_fF};
             }),
             py::arg("row"), py::arg("col"), py::arg("kind"), py::arg("value_fF") = 0.0)
        .def_readwrite("row", &FaultSpec::row)
        .def_readwrite("col", &FaultSpec::col)
        .def_readwrite("kind", &FaultSpec::kind)
        .def_readwrite("value_fF", &FaultSpec::value_fF);

    py::class_<CellMatrix>(m, "CellMatrix")
        .def(py::init<int, int, double>(), py::arg("rows"), py::arg("cols"), py::arg("fill_fF"))
        .def(py::init<int, int, std::vector<double>>(), py::arg("rows"), py::arg("cols"),
             py::arg("values_fF"))
        .def_property_readonly("rows", &CellMatrix::rows)
        .def_property_readonly("cols", &CellMatrix::cols)
        .def("value_at", &CellMatrix::value_at)
        .def("set_value", &CellMatrix::set_value)
        .def("set_fault", &CellMatrix::set_fault)
        .def("clear_fault", &CellMatrix::clear_fault);

    py::class_<MacroCell>(m, "MacroCell")
        .def_readonly("rows", &MacroCell::rows)
        .def_readonly("cols", &MacroCell::cols)
        .def_readonly("c_ref_fF", &MacroCell::c_ref_fF)
        .def("netlist_json",
             [](const MacroCell& mc) { return netlist_to_json(mc.netlist).dump(2); });

    m.def("build_macro_cell", &build_macro_cell, py::arg("cells"),
          py::arg("parasitics") = ParasiticConfig{}, py::arg("c_ref_fF") = kDefaultCRefFf);

    py::class_<CircuitState>(m, "CircuitState")
        .def_readonly("node_voltage_V", &CircuitState::node_voltage_V)
        .def_readonly("cap_charge_fC", &CircuitState::cap_charge_fC)
        .def_readonly("time_ns", &CircuitState::time_ns);

    py::class_<MeasurementOutcome>(m, "MeasurementOutcome")
        .def_readonly("v_gs_V", &MeasurementOutcome::v_gs_V)
        .def_readonly("elapsed_ns", &MeasurementOutcome::elapsed_ns)
        .def_readonly("conflict_phases", &MeasurementOutcome::conflict_phases);

    py::class_<ConversionResult>(m, "ConversionResult")
        .def_readonly("step", &ConversionResult::step)
        .def_readonly("flipped", &ConversionResult::flipped);

    py::class_<CellMeasurement>(m, "CellMeasurement")
        .def_readonly("outcome", &CellMeasurement::outcome)
        .def_readonly("conversion", &CellMeasurement::conversion)
        .def_readonly("elapsed_ns", &CellMeasurement::elapsed_ns);

    m.def("dsat_current_uA", &dsat_current_uA, py::arg("v_gs_V"), py::arg("params"));
    m.def("solve_vds_V", &solve_vds_V, py::arg("i_uA"), py::arg("v_gs_V"), py::arg("params"));
    m.def(
        "convert",
        [](double v_gs_V, const ConverterParams& params) { return convert(v_gs_V, params); },
        py::arg("v_gs_V"), py::arg("params"));
    m.def("measure_cell",
          [](const MacroCell& macro, int row, int col, const ConverterParams& params) {
              return measure_cell(macro, row, col, params);
          },
          py::arg("macro"), py::arg("row"), py::arg("col"), py::arg("params"));
    m.def("set_standard_mode",
          [](const MacroCell& macro, double v_dd_V) { return set_standard_mode(macro, v_dd_V); },
          py::arg("macro"), py::arg("v_dd_V"));

    py::class_<SweepSpec>(m, "SweepSpec")
        .def(py::init<>())
        .def_readwrite("c_min_fF", &SweepSpec::c_min_fF)
        .def_readwrite("c_max_fF", &SweepSpec::c_max_fF)
        .def_readwrite("resolution_fF", &SweepSpec::resolution_fF);

    py::class_<AbacusBin>(m, "AbacusBin")
        .def_readonly("step", &AbacusBin::step)
        .def_readonly("c_lo_fF", &AbacusBin::c_lo_fF)
        .def_readonly("c_hi_fF", &AbacusBin::c_hi_fF);

    py::class_<Abacus>(m, "Abacus")
        .def_property_readonly("bins", &Abacus::bins)
        .def_property_readonly("entries", &Abacus::entries)
        .def_property_readonly("n_steps", &Abacus::n_steps)
        .def_property_readonly("fingerprint", &Abacus::fingerprint);

    py::class_<AbacusEntry>(m, "AbacusEntry")
        .def_readonly("c_m_fF", &AbacusEntry::c_m_fF)
        .def_readonly("step", &AbacusEntry::step);

    m.def("auto_size_delta_i", &auto_size_delta_i, py::arg("params"), py::arg("c_top_fF"),
          py::arg("parasitics") = ParasiticConfig{});
    m.def("build_abacus", &build_abacus, py::arg("params"), py::arg("sweep") = SweepSpec{},
          py::arg("parasitics") = ParasiticConfig{});
    m.def("params_fingerprint", &params_fingerprint, py::arg("params"), py::arg("parasitics"));

    py::enum_<RangeFlag>(m, "RangeFlag")
        .value("in_range", RangeFlag::in_range)
        .value("under_range", RangeFlag::under_range)
        .value("over_range", RangeFlag::over_range);

    py::class_<CapEstimate>(m, "CapEstimate")
        .def_readonly("flag", &CapEstimate::flag)
        .def_readonly("point_fF", &CapEstimate::point_fF)
        .def_readonly("lo_fF", &CapEstimate::lo_fF)
        .def_readonly("hi_fF", &CapEstimate::hi_fF);

    m.def("estimate_capacitance", &estimate_capacitance, py::arg("abacus"), py::arg("step"));

    py::enum_<DiagnosisLabel>(m, "DiagnosisLabel")
        .value("in_range", DiagnosisLabel::in_range)
        .value("under_range_short_open", DiagnosisLabel::under_range_short_open)
        .value("over_range", DiagnosisLabel::over_range);

    py::class_<Diagnosis>(m, "Diagnosis")
        .def_readonly("label", &Diagnosis::label)
        .def_readonly("estimate", &Diagnosis::estimate);

    py::class_<CellRecord>(m, "CellRecord")
        .def_readonly("row", &CellRecord::row)
        .def_readonly("col", &CellRecord::col)
        .def_readonly("step", &CellRecord::step)
        .def_readonly("label", &CellRecord::label)
        .def_readonly("estimate_fF", &CellRecord::estimate_fF)
        .def_readonly("v_gs_V", &CellRecord::v_gs_V)
        .def_readonly("had_conflict", &CellRecord::had_conflict);

    py::class_<AnalogBitmap>(m, "AnalogBitmap")
        .def_readonly("rows", &AnalogBitmap::rows)
        .def_readonly("cols", &AnalogBitmap::cols)
        .def_readonly("cells", &AnalogBitmap::cells)
        .def_readonly("total_sim_time_ns", &AnalogBitmap::total_sim_time_ns)
        .def_readonly("in_range", &AnalogBitmap::in_range)
        .def_readonly("under_range", &AnalogBitmap::under_range)
        .def_readonly("over_range", &AnalogBitmap::over_range)
        .def("at", &AnalogBitmap::at, py::return_value_policy::reference_internal);

    m.def("inject_fault", &inject_fault, py::arg("cells"), py::arg("fault"));
    m.def("classify", &classify, py::arg("step"), py::arg("abacus"));
    m.def("scan_array", &scan_array, py::arg("cells"), py::arg("parasitics"), py::arg("params"),
          py::arg("abacus"));

    py::class_<Histogram>(m, "Histogram")
        .def_readonly("bin_width_fF", &Histogram::bin_width_fF)
        .def_readonly("origin_fF", &Histogram::origin_fF)
        .def_readonly("buckets", &Histogram::buckets)
        .def_readonly("under_range", &Histogram::under_range)
        .def_readonly("over_range", &Histogram::over_range);

    m.def("signature_histogram", &signature_histogram, py::arg("bitmap"),
          py::arg("bin_width_fF"));

    m.def("netlist_json_roundtrip",
          [](const std::string& text) { return netlist_to_json(netlist_from_json(parse_json(text))).dump(2); });
}
