#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capmeter/netlist.hpp"

namespace capmeter {

// Stray capacitance hung on the shared plate, the bit lines and the cell
// storage nodes. Vectors may be empty (zero), single-valued (uniform) or
// fully per-column / per-cell (row major).
struct ParasiticConfig {
    double plate_fF = 0.0;
    std::vector<double> bitline_fF;
    std::vector<double> storage_fF;

    double bitline_at(int col) const;
    double storage_at(int row, int col, int cols) const;
    void validate(int rows, int cols) const;
};

enum class FaultKind {
    shorted,        // cell capacitor replaced by a permanent connection
    open,           // cell capacitor missing entirely
    value_override, // cell capacitor present with an off-nominal value
};

struct FaultSpec {
    int row = 0;
    int col = 0;
    FaultKind kind = FaultKind::shorted;
    double value_fF = 0.0; // used by value_override only
};

const char* fault_kind_name(FaultKind kind);
FaultKind fault_kind_from_name(const std::string& name);

// Nominal capacitance per cell plus an optional fault at some positions.
class CellMatrix {
public:
    CellMatrix(int rows, int cols, double fill_fF);
    CellMatrix(int rows, int cols, std::vector<double> values_fF);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double value_at(int row, int col) const;
    void set_value(int row, int col, double value_fF);
    const FaultSpec* fault_at(int row, int col) const;
    void set_fault(const FaultSpec& fault);
    void clear_fault(int row, int col);
    const std::map<std::pair<int, int>, FaultSpec>& faults() const { return faults_; }

private:
    void check_position(int row, int col) const;
    int rows_;
    int cols_;
    std::vector<double> values_fF_;
    std::map<std::pair<int, int>, FaultSpec> faults_;
};

// One measurement macro: rows x cols storage cells on a shared plate, per
// column a bit line with select switch and write driver, plus the shared
// charge-injection branch, reference capacitor and mode switches.
struct MacroCell {
    Netlist netlist;
    int rows = 0;
    int cols = 0;
    double c_ref_fF = 0.0;
    ParasiticConfig parasitics;

    NodeId plate;       // shared plate of all cell capacitors
    NodeId ref_gate;    // gate of the ramp transistor, carries the sensed voltage
    NodeId inject_in;   // charge-injection supply node (source IN)
    NodeId standard_in; // plate bias supply for pass-through mode (source IN_STD)
    std::vector<NodeId> bitline;       // per column
    std::vector<NodeId> bitline_in;    // per column, write driver node
    std::vector<NodeId> storage;       // per cell, row major
    std::vector<int> cell_cap_index;   // per cell, -1 when open or shorted

    static std::string word_line_name(int row);
    static std::string bitline_select_name(int col);
    static std::string bitline_source_name(int col);

    int cell_index(int row, int col) const { return row * cols + col; }
};

// Builds the array netlist. Shorted cells become permanently closed
// switches, open cells drop the capacitor but keep the access switch,
// value overrides replace the nominal capacitance.
MacroCell build_macro_cell(const CellMatrix& cells, const ParasiticConfig& parasitics,
                           double c_ref_fF);

} // namespace capmeter
