#include "capmeter/diagnosis.hpp"

#include <cmath>
#include <string>

#include "capmeter/errors.hpp"
#include "capmeter/pipeline.hpp"

namespace capmeter {

const char* diagnosis_label_name(DiagnosisLabel label) {
    switch (label) {
    case DiagnosisLabel::in_range: return "in_range";
    case DiagnosisLabel::under_range_short_open: return "under_range_short_open";
    case DiagnosisLabel::over_range: return "over_range";
    }
    return "?";
}

CellMatrix inject_fault(const CellMatrix& cells, const FaultSpec& fault) {
    CellMatrix out = cells;
    out.set_fault(fault); // bounds and duplicates checked there
    return out;
}

Diagnosis classify(int step, const Abacus& abacus) {
    Diagnosis d;
    d.estimate = estimate_capacitance(abacus, step);
    switch (d.estimate.flag) {
    case RangeFlag::under_range: d.label = DiagnosisLabel::under_range_short_open; break;
    case RangeFlag::over_range: d.label = DiagnosisLabel::over_range; break;
    case RangeFlag::in_range: d.label = DiagnosisLabel::in_range; break;
    }
    return d;
}

const CellRecord& AnalogBitmap::at(int row, int col) const {
    if (row < 0 || row >= rows || col < 0 || col >= cols)
        throw ConfigError("bitmap cell out of bounds");
    return cells[static_cast<size_t>(row) * cols + col];
}

AnalogBitmap scan_array(const CellMatrix& cells, const ParasiticConfig& parasitics,
                        const ConverterParams& params, const Abacus& abacus) {
    params.validate();
    std::string current = params_fingerprint(params, parasitics);
    if (current != abacus.fingerprint())
        throw FingerprintError("abacus fingerprint " + abacus.fingerprint() +
                               " does not match the current parameter set " + current +
                               "; recalibrate");

    MacroCell macro = build_macro_cell(cells, parasitics, params.c_ref_fF);
    AnalogBitmap bitmap;
    bitmap.rows = cells.rows();
    bitmap.cols = cells.cols();
    bitmap.abacus_fingerprint = abacus.fingerprint();
    bitmap.cal_lo_fF = abacus.sweep().c_min_fF;
    bitmap.cal_hi_fF = abacus.sweep().c_max_fF;
    bitmap.cells.reserve(static_cast<size_t>(bitmap.rows) * bitmap.cols);

    for (int r = 0; r < bitmap.rows; ++r) {
        for (int c = 0; c < bitmap.cols; ++c) {
            CellMeasurement m = measure_cell(macro, r, c, params);
            Diagnosis d = classify(m.conversion.step, abacus);

            CellRecord rec;
            rec.row = r;
            rec.col = c;
            rec.step = m.conversion.step;
            rec.label = d.label;
            rec.estimate_fF = d.estimate.point_fF;
            rec.interval_lo_fF = d.estimate.lo_fF;
            rec.interval_hi_fF = d.estimate.hi_fF;
            rec.v_gs_V = m.outcome.v_gs_V;
            rec.had_conflict = !m.outcome.conflict_phases.empty();
            bitmap.cells.push_back(rec);

            bitmap.total_sim_time_ns += m.elapsed_ns;
            switch (d.label) {
            case DiagnosisLabel::in_range:
                ++bitmap.in_range;
                ++bitmap.step_counts[rec.step];
                break;
            case DiagnosisLabel::under_range_short_open: ++bitmap.under_range; break;
            case DiagnosisLabel::over_range: ++bitmap.over_range; break;
            }
        }
    }
    return bitmap;
}

Histogram signature_histogram(const AnalogBitmap& bitmap, double bin_width_fF) {
    if (!(bin_width_fF > 0.0)) throw ConfigError("histogram bin width must be positive");
    Histogram h;
    h.bin_width_fF = bin_width_fF;
    h.origin_fF = bitmap.cal_lo_fF;
    for (const auto& rec : bitmap.cells) {
        switch (rec.label) {
        case DiagnosisLabel::under_range_short_open: ++h.under_range; break;
        case DiagnosisLabel::over_range: ++h.over_range; break;
        case DiagnosisLabel::in_range: {
            int bucket = static_cast<int>(std::floor((*rec.estimate_fF - h.origin_fF) /
                                                     bin_width_fF));
            ++h.buckets[bucket];
            break;
        }
        }
    }
    return h;
}

} // namespace capmeter
