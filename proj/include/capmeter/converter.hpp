#pragma once

#include <optional>
#include <vector>

namespace capmeter {

inline constexpr double kDefaultVddV = 1.8;
inline constexpr double kDefaultVtV = 0.45;
inline constexpr double kDefaultKUaPerV2 = 200.0;
inline constexpr double kDefaultCRefFf = 30.0;
inline constexpr int kDefaultNSteps = 20;

// Full-scale calibration span. The bottom maps to the step-0 boundary,
// the top to the last-step boundary under the default device values.
inline constexpr double kDefaultSpanLoFf = 10.0;
inline constexpr double kDefaultSpanHiFf = 55.0;

// Ramp and sense-device parameters for the charge-to-digital stage.
// delta_i_uA of 0 means "size me": see sized_delta_i_uA / auto_size_delta_i.
struct ConverterParams {
    double c_ref_fF = kDefaultCRefFf;
    double v_dd_V = kDefaultVddV;
    double v_t_V = kDefaultVtV;
    double k_uA_per_V2 = kDefaultKUaPerV2;
    double delta_i_uA = 0.0;
    int n_steps = kDefaultNSteps;
    double inverter_threshold_V = kDefaultVddV / 2.0;

    // All defaults with delta_i sized so the top of the default span
    // saturates the ramp.
    static ConverterParams defaults();

    void validate() const; // throws ConfigError
};

// Saturation current of the square-law sense device at the given gate
// voltage. Zero at or below threshold.
double dsat_current_uA(double v_gs_V, const ConverterParams& params);

// Drain voltage with current i forced through the device. Returns the
// rail when the device is off or the demand exceeds saturation, else the
// physical triode root.
double solve_vds_V(double i_uA, double v_gs_V, const ConverterParams& params);

struct ConversionResult {
    int step = 0;             // completed sub-threshold steps, in [0, n_steps]
    bool flipped = false;     // whether the comparator tripped within the ramp
    std::optional<std::vector<double>> v_ds_trace_V;
};

// Walks the current ramp n = 1..n_steps at I = n * delta_i and reports
// how many steps completed before the drain crossed the comparator
// threshold. n_steps means the output never switched.
ConversionResult convert(double v_gs_V, const ConverterParams& params,
                         bool keep_trace = false);

// Largest delta_i with n_steps * delta_i strictly below the saturation
// current at v_gs_top, so the top of scale reads exactly n_steps.
double sized_delta_i_uA(double v_gs_top_V, const ConverterParams& params);

} // namespace capmeter
