#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "capmeter/macro_cell.hpp"
#include "capmeter/netlist.hpp"

namespace capmeter {

// Symbolic drive level. Numeric lowering happens at solve time so a
// schedule stays valid for any supply voltage.
enum class Drive { ground, vdd, high_z };

// One phase worth of control values for the whole array.
struct SignalVector {
    std::vector<bool> wl;      // per row
    std::vector<bool> s_bl;    // per column
    std::vector<Drive> in_bl;  // per column
    bool lec = false;
    bool prg = false;
    bool std_mode = false;
    Drive in_drive = Drive::high_z;

    // std_mode excludes every measurement-path switch.
    void validate(int rows, int cols) const;
};

inline constexpr double kPhaseDurationNs = 10.0;
inline constexpr int kPhaseCount = 5;

struct PhaseSchedule {
    std::array<SignalVector, kPhaseCount> phases;
    int target_row = 0;
    int target_col = 0;
};

struct MeasurementOutcome {
    double v_gs_V = 0.0;
    double elapsed_ns = 0.0;
    // Phases (1-based) where rail contention forced the solver to keep the
    // previous state instead of resolving the short. A cell shorted onto a
    // grounded bit line trips this during the charge phase.
    std::vector<int> conflict_phases;
    std::optional<std::vector<CircuitState>> trace; // post-phase states 1..4
    CircuitState final_state;
};

// The five-phase flow for one target cell:
//   1 discharge everything, 2 charge the target cell (all other columns
//   held at the supply so their row mates take no charge), 3 float the
//   plate and deselect the other columns, 4 dump the plate charge onto
//   the reference capacitor, 5 hold for conversion.
PhaseSchedule build_schedule(int rows, int cols, int target_row, int target_col);

// Maps symbolic per-phase controls onto concrete switch/source values.
SignalAssignment lower_signals(const MacroCell& macro, const SignalVector& signals,
                               double v_dd_V);

using PhaseObserver = std::function<void(int phase, const SignalAssignment& signals,
                                         const CircuitState& before, const CircuitState& after)>;

struct MeasureOptions {
    bool keep_trace = false;
    const CircuitState* initial = nullptr; // nullptr: fully discharged network
    PhaseObserver observer;                // called after each solved phase
};

// Runs phases 1..4 and reads the sensed gate voltage. Phase 5 belongs to
// the converter; elapsed_ns is therefore 40 here.
MeasurementOutcome run_measurement(const MacroCell& macro, const PhaseSchedule& schedule,
                                   double v_dd_V, const MeasureOptions& options = {});

// Normal-operation bias: measurement switches open, plate held at v_dd/2.
CircuitState set_standard_mode(const MacroCell& macro, double v_dd_V,
                               const CircuitState* prior = nullptr);

} // namespace capmeter
