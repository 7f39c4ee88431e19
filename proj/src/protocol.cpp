#include "capmeter/protocol.hpp"

#include <string>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

std::optional<double> drive_value(Drive d, double v_dd_V) {
    switch (d) {
    case Drive::ground: return 0.0;
    case Drive::vdd: return v_dd_V;
    case Drive::high_z: return std::nullopt;
    }
    return std::nullopt;
}

SignalVector blank(int rows, int cols) {
    SignalVector sv;
    sv.wl.assign(rows, false);
    sv.s_bl.assign(cols, false);
    sv.in_bl.assign(cols, Drive::high_z);
    return sv;
}

} // namespace

void SignalVector::validate(int rows, int cols) const {
    if (static_cast<int>(wl.size()) != rows || static_cast<int>(s_bl.size()) != cols ||
        static_cast<int>(in_bl.size()) != cols)
        throw ConfigError("signal vector does not match the array dimensions");
    if (std_mode) {
        bool any_sbl = false;
        for (bool b : s_bl) any_sbl = any_sbl || b;
        if (lec || prg || any_sbl)
            throw ConfigError("standard mode excludes LEC, PRG and every bit-line select");
    }
}

PhaseSchedule build_schedule(int rows, int cols, int target_row, int target_col) {
    if (rows < 1 || cols < 1) throw ConfigError("array must be at least 1x1");
    if (target_row < 0 || target_row >= rows || target_col < 0 || target_col >= cols)
        throw ConfigError("target cell (" + std::to_string(target_row) + "," +
                          std::to_string(target_col) + ") is outside the array");

    PhaseSchedule sched;
    sched.target_row = target_row;
    sched.target_col = target_col;

    // 1: ground every node reachable through the switch fabric.
    SignalVector p1 = blank(rows, cols);
    p1.wl.assign(rows, true);
    p1.s_bl.assign(cols, true);
    p1.in_bl.assign(cols, Drive::ground);
    p1.lec = true;
    p1.prg = true;
    p1.in_drive = Drive::ground;

    // 2: plate to the supply, target column held low so only the target
    // cell takes charge; the other columns ride at the supply so their
    // row mates see no voltage across them.
    SignalVector p2 = p1;
    p2.wl.assign(rows, false);
    p2.wl[target_row] = true;
    p2.in_bl.assign(cols, Drive::vdd);
    p2.in_bl[target_col] = Drive::ground;
    p2.lec = false;
    p2.in_drive = Drive::vdd;

    // 3: plate floats (the charge injector opened at the end of phase 2)
    // and every column but the target drops off the fabric.
    SignalVector p3 = p2;
    p3.prg = false;
    p3.s_bl.assign(cols, false);
    p3.s_bl[target_col] = true;

    // 4: reference capacitor joins the plate; charge sharing sets the
    // sensed gate voltage.
    SignalVector p4 = p3;
    p4.lec = true;

    // 5: hold for the current ramp.
    SignalVector p5 = p4;

    sched.phases = {p1, p2, p3, p4, p5};
    return sched;
}

SignalAssignment lower_signals(const MacroCell& macro, const SignalVector& signals,
                               double v_dd_V) {
    signals.validate(macro.rows, macro.cols);
    SignalAssignment a = macro.netlist.default_assignment();
    for (int r = 0; r < macro.rows; ++r)
        a.switch_closed[MacroCell::word_line_name(r)] = signals.wl[r];
    for (int c = 0; c < macro.cols; ++c) {
        a.switch_closed[MacroCell::bitline_select_name(c)] = signals.s_bl[c];
        a.source_drive_V[MacroCell::bitline_source_name(c)] =
            drive_value(signals.in_bl[c], v_dd_V);
    }
    a.switch_closed["LEC"] = signals.lec;
    a.switch_closed["PRG"] = signals.prg;
    a.switch_closed["STD"] = signals.std_mode;
    a.source_drive_V["IN"] = drive_value(signals.in_drive, v_dd_V);
    a.source_drive_V["IN_STD"] =
        signals.std_mode ? std::optional<double>(v_dd_V / 2.0) : std::nullopt;
    return a;
}

MeasurementOutcome run_measurement(const MacroCell& macro, const PhaseSchedule& schedule,
                                   double v_dd_V, const MeasureOptions& options) {
    if (v_dd_V <= 0.0) throw ConfigError("supply voltage must be positive");
    for (const auto& phase : schedule.phases) phase.validate(macro.rows, macro.cols);
    if (schedule.target_row < 0 || schedule.target_row >= macro.rows ||
        schedule.target_col < 0 || schedule.target_col >= macro.cols)
        throw ConfigError("schedule target is outside the array");

    MeasurementOutcome out;
    if (options.keep_trace) out.trace.emplace();

    CircuitState state =
        options.initial ? *options.initial : macro.netlist.initial_state();
    for (int phase = 1; phase <= 4; ++phase) {
        SignalAssignment signals =
            lower_signals(macro, schedule.phases[phase - 1], v_dd_V);
        CircuitState next;
        try {
            next = apply_switches(macro.netlist, signals, state);
        } catch (const SourceConflictError&) {
            // Rail contention (a shorted cell bridging the charge injector
            // and a grounded bit line). The network cannot settle to a new
            // equilibrium; hold the previous state and record the phase.
            out.conflict_phases.push_back(phase);
            next = state;
        }
        next.time_ns = state.time_ns + kPhaseDurationNs;
        if (options.observer) options.observer(phase, signals, state, next);
        state = std::move(next);
        if (out.trace) out.trace->push_back(state);
    }

    out.v_gs_V = state.node_voltage_V[macro.ref_gate.index];
    out.elapsed_ns = 4 * kPhaseDurationNs;
    out.final_state = std::move(state);
    return out;
}

CircuitState set_standard_mode(const MacroCell& macro, double v_dd_V,
                               const CircuitState* prior) {
    if (v_dd_V <= 0.0) throw ConfigError("supply voltage must be positive");
    SignalVector sv = blank(macro.rows, macro.cols);
    sv.std_mode = true;
    SignalAssignment signals = lower_signals(macro, sv, v_dd_V);
    CircuitState state = prior ? *prior : macro.netlist.initial_state();
    return apply_switches(macro.netlist, signals, state);
}

} // namespace capmeter
