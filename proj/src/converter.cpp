#include "capmeter/converter.hpp"

#include <cmath>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

void validate_device(const ConverterParams& p) {
    if (p.c_ref_fF <= 0.0) throw ConfigError("c_ref_fF must be positive");
    if (p.v_dd_V <= 0.0) throw ConfigError("v_dd_V must be positive");
    if (p.v_t_V <= 0.0 || p.v_t_V >= p.v_dd_V)
        throw ConfigError("v_t_V must lie strictly between 0 and v_dd_V");
    if (p.k_uA_per_V2 <= 0.0) throw ConfigError("k_uA_per_V2 must be positive");
    if (p.n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (p.inverter_threshold_V <= 0.0 || p.inverter_threshold_V >= p.v_dd_V)
        throw ConfigError("inverter_threshold_V must lie strictly between 0 and v_dd_V");
}

} // namespace

void ConverterParams::validate() const {
    validate_device(*this);
    if (delta_i_uA <= 0.0) throw ConfigError("delta_i_uA must be positive (or sized first)");
}

ConverterParams ConverterParams::defaults() {
    ConverterParams p;
    double v_gs_top = p.v_dd_V * kDefaultSpanHiFf / (kDefaultSpanHiFf + p.c_ref_fF);
    p.delta_i_uA = sized_delta_i_uA(v_gs_top, p);
    return p;
}

double dsat_current_uA(double v_gs_V, const ConverterParams& params) {
    validate_device(params);
    if (v_gs_V <= params.v_t_V) return 0.0;
    double vov = v_gs_V - params.v_t_V;
    return 0.5 * params.k_uA_per_V2 * vov * vov;
}

double solve_vds_V(double i_uA, double v_gs_V, const ConverterParams& params) {
    validate_device(params);
    if (i_uA < 0.0) throw ConfigError("ramp current must be >= 0");
    if (v_gs_V <= params.v_t_V) return params.v_dd_V;
    double vov = v_gs_V - params.v_t_V;
    double i_sat = 0.5 * params.k_uA_per_V2 * vov * vov;
    if (i_uA >= i_sat) return params.v_dd_V; // demand beyond saturation: rail
    return vov - std::sqrt(vov * vov - 2.0 * i_uA / params.k_uA_per_V2);
}

ConversionResult convert(double v_gs_V, const ConverterParams& params, bool keep_trace) {
    params.validate();
    if (v_gs_V < 0.0 || v_gs_V > params.v_dd_V)
        throw ConfigError("gate voltage outside [0, v_dd]");

    ConversionResult result;
    if (keep_trace) result.v_ds_trace_V.emplace();
    for (int n = 1; n <= params.n_steps; ++n) {
        double v_ds = solve_vds_V(n * params.delta_i_uA, v_gs_V, params);
        if (result.v_ds_trace_V) result.v_ds_trace_V->push_back(v_ds);
        if (v_ds >= params.inverter_threshold_V) {
            result.step = n - 1;
            result.flipped = true;
            return result;
        }
    }
    result.step = params.n_steps;
    result.flipped = false;
    return result;
}

double sized_delta_i_uA(double v_gs_top_V, const ConverterParams& params) {
    validate_device(params);
    double i_sat = dsat_current_uA(v_gs_top_V, params);
    if (i_sat <= 0.0)
        throw CalibrationError("full-scale gate voltage is below the device threshold; "
                               "the ramp cannot be sized");
    double d = i_sat / params.n_steps;
    // Largest value whose full ramp still stays below saturation, so the
    // top of scale never flips the comparator.
    while (params.n_steps * d >= i_sat) d = std::nextafter(d, 0.0);
    if (d <= 0.0) throw CalibrationError("ramp step degenerated to zero while sizing");
    return d;
}

} // namespace capmeter
