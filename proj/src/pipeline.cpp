#include "capmeter/pipeline.hpp"

namespace capmeter {

CellMeasurement measure_cell(const MacroCell& macro, int row, int col,
                             const ConverterParams& params, const MeasureOptions& options) {
    params.validate();
    CellMeasurement m;
    PhaseSchedule schedule = build_schedule(macro.rows, macro.cols, row, col);
    m.outcome = run_measurement(macro, schedule, params.v_dd_V, options);
    m.conversion = convert(m.outcome.v_gs_V, params, options.keep_trace);
    m.elapsed_ns = kCellMeasureNs;
    return m;
}

} // namespace capmeter
