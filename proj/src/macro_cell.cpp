#include "capmeter/macro_cell.hpp"

#include <string>

#include "capmeter/errors.hpp"

namespace capmeter {

double ParasiticConfig::bitline_at(int col) const {
    if (bitline_fF.empty()) return 0.0;
    if (bitline_fF.size() == 1) return bitline_fF[0];
    return bitline_fF[static_cast<size_t>(col)];
}

double ParasiticConfig::storage_at(int row, int col, int cols) const {
    if (storage_fF.empty()) return 0.0;
    if (storage_fF.size() == 1) return storage_fF[0];
    return storage_fF[static_cast<size_t>(row) * cols + col];
}

void ParasiticConfig::validate(int rows, int cols) const {
    if (plate_fF < 0.0) throw ConfigError("plate parasitic must be >= 0 fF");
    auto check = [](const std::vector<double>& v, const char* what) {
        for (double x : v)
            if (x < 0.0) throw ConfigError(std::string(what) + " parasitics must be >= 0 fF");
    };
    check(bitline_fF, "bit-line");
    check(storage_fF, "storage");
    size_t nb = bitline_fF.size();
    if (nb > 1 && nb != static_cast<size_t>(cols))
        throw ConfigError("bit-line parasitic list must be empty, one value, or one per column");
    size_t ns = storage_fF.size();
    if (ns > 1 && ns != static_cast<size_t>(rows) * cols)
        throw ConfigError("storage parasitic list must be empty, one value, or one per cell");
}

const char* fault_kind_name(FaultKind kind) {
    switch (kind) {
    case FaultKind::shorted: return "short";
    case FaultKind::open: return "open";
    case FaultKind::value_override: return "value_override";
    }
    return "?";
}

FaultKind fault_kind_from_name(const std::string& name) {
    if (name == "short" || name == "shorted") return FaultKind::shorted;
    if (name == "open") return FaultKind::open;
    if (name == "value_override" || name == "value") return FaultKind::value_override;
    throw ConfigError("unknown fault kind '" + name +
                      "' (expected short, open or value_override)");
}

CellMatrix::CellMatrix(int rows, int cols, double fill_fF)
    : CellMatrix(rows, cols, std::vector<double>(static_cast<size_t>(rows < 0 ? 0 : rows) *
                                                     (cols < 0 ? 0 : cols),
                                                 fill_fF)) {}

CellMatrix::CellMatrix(int rows, int cols, std::vector<double> values_fF)
    : rows_(rows), cols_(cols), values_fF_(std::move(values_fF)) {
    if (rows_ < 1 || cols_ < 1) throw ConfigError("cell array must be at least 1x1");
    if (values_fF_.size() != static_cast<size_t>(rows_) * cols_)
        throw ConfigError("cell value matrix does not match the array dimensions");
    for (double v : values_fF_)
        if (v < 0.0) throw ConfigError("cell capacitance must be >= 0 fF");
}

void CellMatrix::check_position(int row, int col) const {
    if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
        throw ConfigError("cell (" + std::to_string(row) + "," + std::to_string(col) +
                          ") is outside the " + std::to_string(rows_) + "x" +
                          std::to_string(cols_) + " array");
}

double CellMatrix::value_at(int row, int col) const {
    check_position(row, col);
    return values_fF_[static_cast<size_t>(row) * cols_ + col];
}

void CellMatrix::set_value(int row, int col, double value_fF) {
    check_position(row, col);
    if (value_fF < 0.0) throw ConfigError("cell capacitance must be >= 0 fF");
    values_fF_[static_cast<size_t>(row) * cols_ + col] = value_fF;
}

const FaultSpec* CellMatrix::fault_at(int row, int col) const {
    check_position(row, col);
    auto it = faults_.find({row, col});
    return it == faults_.end() ? nullptr : &it->second;
}

void CellMatrix::set_fault(const FaultSpec& fault) {
    check_position(fault.row, fault.col);
    if (fault.kind == FaultKind::value_override && fault.value_fF < 0.0)
        throw ConfigError("fault value override must be >= 0 fF");
    auto [it, inserted] = faults_.emplace(std::make_pair(fault.row, fault.col), fault);
    if (!inserted)
        throw ConfigError("cell (" + std::to_string(fault.row) + "," +
                          std::to_string(fault.col) + ") already carries a fault");
}

void CellMatrix::clear_fault(int row, int col) {
    check_position(row, col);
    faults_.erase({row, col});
}

std::string MacroCell::word_line_name(int row) { return "WL" + std::to_string(row); }
std::string MacroCell::bitline_select_name(int col) { return "S_BL" + std::to_string(col); }
std::string MacroCell::bitline_source_name(int col) { return "IN_BL" + std::to_string(col); }

MacroCell build_macro_cell(const CellMatrix& cells, const ParasiticConfig& parasitics,
                           double c_ref_fF) {
    parasitics.validate(cells.rows(), cells.cols());
    if (c_ref_fF < 0.0) throw ConfigError("reference capacitance must be >= 0 fF");

    MacroCell m;
    m.rows = cells.rows();
    m.cols = cells.cols();
    m.c_ref_fF = c_ref_fF;
    m.parasitics = parasitics;

    Netlist& nl = m.netlist;
    m.plate = nl.add_node("plate");
    m.ref_gate = nl.add_node("gate");
    m.inject_in = nl.add_node("in");
    m.standard_in = nl.add_node("std_in");
    for (int c = 0; c < m.cols; ++c) {
        m.bitline.push_back(nl.add_node("bl" + std::to_string(c)));
        m.bitline_in.push_back(nl.add_node("bl_in" + std::to_string(c)));
    }
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            m.storage.push_back(nl.add_node("s" + std::to_string(r) + "_" + std::to_string(c)));

    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            const int i = m.cell_index(r, c);
            const std::string suffix = std::to_string(r) + "_" + std::to_string(c);
            const FaultSpec* fault = cells.fault_at(r, c);
            if (fault && fault->kind == FaultKind::shorted) {
                nl.add_switch(m.plate, m.storage[i], "SHORT", true);
                m.cell_cap_index.push_back(-1);
            } else if (fault && fault->kind == FaultKind::open) {
                m.cell_cap_index.push_back(-1);
            } else {
                double v = fault ? fault->value_fF : cells.value_at(r, c);
                m.cell_cap_index.push_back(
                    nl.add_capacitor(m.plate, m.storage[i], v, "cell" + suffix));
            }
            nl.add_switch(m.storage[i], m.bitline[c], MacroCell::word_line_name(r));
            double cs = parasitics.storage_at(r, c, m.cols);
            if (cs > 0.0) nl.add_capacitor(m.storage[i], kGround, cs, "c_s" + suffix);
        }
    }

    for (int c = 0; c < m.cols; ++c) {
        nl.add_switch(m.bitline[c], m.bitline_in[c], MacroCell::bitline_select_name(c));
        nl.add_source(m.bitline_in[c], MacroCell::bitline_source_name(c));
        double cb = parasitics.bitline_at(c);
        if (cb > 0.0) nl.add_capacitor(m.bitline[c], kGround, cb, "c_bl" + std::to_string(c));
    }

    nl.add_switch(m.inject_in, m.plate, "PRG");
    nl.add_switch(m.plate, m.ref_gate, "LEC");
    nl.add_switch(m.standard_in, m.plate, "STD");
    nl.add_source(m.inject_in, "IN");
    nl.add_source(m.standard_in, "IN_STD");
    nl.add_capacitor(m.ref_gate, kGround, c_ref_fF, "c_ref");
    if (parasitics.plate_fF > 0.0) nl.add_capacitor(m.plate, kGround, parasitics.plate_fF, "c_plate");

    return m;
}

} // namespace capmeter
