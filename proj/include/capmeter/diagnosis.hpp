#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capmeter/calibration.hpp"
#include "capmeter/macro_cell.hpp"

namespace capmeter {

enum class DiagnosisLabel {
    in_range,
    under_range_short_open, // step 0: tiny, shorted and open cells all read alike
    over_range,
};

const char* diagnosis_label_name(DiagnosisLabel label);

struct Diagnosis {
    DiagnosisLabel label = DiagnosisLabel::in_range;
    CapEstimate estimate;
};

// Returns a copy of the matrix with one more fault. Throws ConfigError on
// out-of-bounds cells or a second fault on the same cell.
CellMatrix inject_fault(const CellMatrix& cells, const FaultSpec& fault);

// Maps a step reading to its diagnosis through the abacus.
Diagnosis classify(int step, const Abacus& abacus);

struct CellRecord {
    int row = 0;
    int col = 0;
    int step = 0;
    DiagnosisLabel label = DiagnosisLabel::in_range;
    std::optional<double> estimate_fF;
    double interval_lo_fF = 0.0;
    std::optional<double> interval_hi_fF;
    double v_gs_V = 0.0;
    bool had_conflict = false; // rail contention during acquisition (shorted cell)
};

struct AnalogBitmap {
    int rows = 0;
    int cols = 0;
    std::vector<CellRecord> cells; // row major
    double total_sim_time_ns = 0.0;
    std::map<int, int> step_counts; // in-range steps only
    int in_range = 0;
    int under_range = 0;
    int over_range = 0;
    std::string abacus_fingerprint;
    double cal_lo_fF = 0.0; // calibrated span, histogram origin
    double cal_hi_fF = 0.0;

    const CellRecord& at(int row, int col) const;
};

// Measures every cell row-major through the full five-phase flow plus
// conversion, classifying each against the abacus. Throws
// FingerprintError when the abacus was swept under different parameters.
AnalogBitmap scan_array(const CellMatrix& cells, const ParasiticConfig& parasitics,
                        const ConverterParams& params, const Abacus& abacus);

struct Histogram {
    double bin_width_fF = 0.0;
    double origin_fF = 0.0;               // left edge of bucket 0
    std::map<int, int> buckets;           // bucket index -> in-range cell count
    int under_range = 0;
    int over_range = 0;
};

// Buckets the in-range estimates of a bitmap into fixed-width capacitance
// classes; endpoint diagnoses go to dedicated overflow counters.
Histogram signature_histogram(const AnalogBitmap& bitmap, double bin_width_fF);

} // namespace capmeter
