#pragma once

#include "capmeter/converter.hpp"
#include "capmeter/macro_cell.hpp"
#include "capmeter/protocol.hpp"

namespace capmeter {

inline constexpr double kCellMeasureNs = 50.0; // five phases of 10 ns

struct CellMeasurement {
    MeasurementOutcome outcome;
    ConversionResult conversion;
    double elapsed_ns = kCellMeasureNs;
};

// Full flow for one cell: five-phase acquisition then ramp conversion.
CellMeasurement measure_cell(const MacroCell& macro, int row, int col,
                             const ConverterParams& params,
                             const MeasureOptions& options = {});

} // namespace capmeter
