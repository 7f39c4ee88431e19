#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capmeter/converter.hpp"
#include "capmeter/macro_cell.hpp"

namespace capmeter {

struct SweepSpec {
    double c_min_fF = kDefaultSpanLoFf;
    double c_max_fF = kDefaultSpanHiFf;
    double resolution_fF = 0.25;

    void validate() const; // throws ConfigError
};

struct AbacusEntry {
    double c_m_fF = 0.0;
    int step = 0;
};

// Half-open capacitance interval [c_lo, c_hi) reading as `step`. The
// last occupied step is closed above only by the sweep end.
struct AbacusBin {
    int step = 0;
    double c_lo_fF = 0.0;
    double c_hi_fF = 0.0;
};

// Step-to-capacitance lookup table swept from the real pipeline.
class Abacus {
public:
    Abacus() = default;
    Abacus(std::vector<AbacusEntry> entries, std::vector<AbacusBin> bins, SweepSpec sweep,
           int n_steps, std::string fingerprint);

    const std::vector<AbacusEntry>& entries() const { return entries_; }
    const std::vector<AbacusBin>& bins() const { return bins_; }
    const AbacusBin* bin(int step) const;
    const SweepSpec& sweep() const { return sweep_; }
    int n_steps() const { return n_steps_; }
    const std::string& fingerprint() const { return fingerprint_; }

private:
    std::vector<AbacusEntry> entries_;
    std::vector<AbacusBin> bins_;
    SweepSpec sweep_;
    int n_steps_ = 0;
    std::string fingerprint_;
};

// Stable hash of every value that shapes the step curve. An abacus only
// answers for the parameter set it was swept under.
std::string params_fingerprint(const ConverterParams& params, const ParasiticConfig& parasitics);

// Sizes delta_i through the actual acquisition flow so that a cell at
// c_top_fF lands exactly on the final step.
ConverterParams auto_size_delta_i(ConverterParams params, double c_top_fF,
                                  const ParasiticConfig& parasitics = {});

// Sweeps single-cell measurements across the range and records the step
// for each capacitance. Throws CalibrationError if the curve is not
// monotone (mis-sized ramp or broken device parameters).
Abacus build_abacus(const ConverterParams& params, const SweepSpec& sweep,
                    const ParasiticConfig& parasitics = {});

enum class RangeFlag { in_range, under_range, over_range };

struct CapEstimate {
    RangeFlag flag = RangeFlag::in_range;
    std::optional<double> point_fF;  // bin midpoint; absent at the endpoints
    double lo_fF = 0.0;
    std::optional<double> hi_fF;     // absent when over-range (unbounded)
};

// Inverts one step reading. Step 0 is under-range (could equally be a
// shorted or open cell), the last step is over-range.
CapEstimate estimate_capacitance(const Abacus& abacus, int step);

struct StepAccuracy {
    int step = 0;
    double max_rel_error = 0.0;        // |estimate - true| / true
    double max_full_scale_error = 0.0; // |estimate - true| / span
};

struct AccuracyReport {
    double span_fF = 0.0;              // full-scale denominator
    double covered_lo_fF = 0.0;        // in-range portion of the sweep
    double covered_hi_fF = 0.0;
    std::vector<StepAccuracy> per_step;
    double max_rel_error = 0.0;
    double median_rel_error = 0.0;
    double max_full_scale_error = 0.0;
    double median_full_scale_error = 0.0;
};

// Replays every in-range sweep point against its bin-midpoint estimate.
AccuracyReport accuracy_report(const Abacus& abacus);

nlohmann::json abacus_to_json(const Abacus& abacus, const ConverterParams& params,
                              const ParasiticConfig& parasitics);
Abacus abacus_from_json(const nlohmann::json& doc);
std::string abacus_to_csv(const Abacus& abacus);

nlohmann::json accuracy_to_json(const AccuracyReport& report);

} // namespace capmeter
