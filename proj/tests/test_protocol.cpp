#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "capmeter/errors.hpp"
#include "capmeter/macro_cell.hpp"
#include "capmeter/protocol.hpp"
#include "oracles.hpp"

using namespace capmeter;

namespace {

constexpr double kVdd = 1.8;

MeasurementOutcome measure_single(double c_m_fF, double c_ref_fF, double v_dd_V,
                                  const ParasiticConfig& par = {}) {
    CellMatrix cells(1, 1, c_m_fF);
    MacroCell macro = build_macro_cell(cells, par, c_ref_fF);
    return run_measurement(macro, build_schedule(1, 1, 0, 0), v_dd_V);
}

// Audits every phase transition; conflict-held phases cannot be resolved
// into components (that is what the conflict means), so they are skipped.
PhaseObserver make_audit_observer(const Netlist& net, double tol = 1e-12) {
    return [&net, tol](int, const SignalAssignment& signals, const CircuitState& before,
                       const CircuitState& after) {
        try {
            ChargeAudit audit = audit_charge_conservation(net, signals, before, after);
            CHECK(audit.max_rel <= tol);
        } catch (const SourceConflictError&) {
        }
    };
}

} // namespace

TEST_CASE("schedule structure encodes the five-phase flow") {
    PhaseSchedule s = build_schedule(2, 2, 0, 0);
    REQUIRE(s.phases.size() == 5);

    const SignalVector& p1 = s.phases[0];
    CHECK(p1.wl == std::vector<bool>{true, true});
    CHECK(p1.s_bl == std::vector<bool>{true, true});
    CHECK(p1.in_bl == std::vector<Drive>{Drive::ground, Drive::ground});
    CHECK(p1.lec);
    CHECK(p1.prg);
    CHECK(p1.in_drive == Drive::ground);
    CHECK(!p1.std_mode);

    const SignalVector& p2 = s.phases[1];
    CHECK(p2.wl == std::vector<bool>{true, false});
    CHECK(p2.in_bl == std::vector<Drive>{Drive::ground, Drive::vdd});
    CHECK(!p2.lec);
    CHECK(p2.prg);
    CHECK(p2.in_drive == Drive::vdd);
    CHECK(p2.s_bl == std::vector<bool>{true, true});

    const SignalVector& p3 = s.phases[2];
    CHECK(!p3.prg);
    CHECK(p3.s_bl == std::vector<bool>{true, false});
    CHECK(!p3.lec);

    const SignalVector& p4 = s.phases[3];
    CHECK(p4.lec);
    CHECK(!p4.prg);

    // phase 5 only holds phase 4's signals for the ramp
    CHECK(s.phases[4].lec == p4.lec);
    CHECK(s.phases[4].prg == p4.prg);
    CHECK(s.phases[4].s_bl == p4.s_bl);
    CHECK(s.phases[4].wl == p4.wl);
}

TEST_CASE("schedule for a single-cell array has no other columns to raise") {
    PhaseSchedule s = build_schedule(1, 1, 0, 0);
    CHECK(s.phases[1].in_bl == std::vector<Drive>{Drive::ground});
    CHECK(s.phases[1].wl == std::vector<bool>{true});
}

TEST_CASE("schedule selects exactly one word line and one column") {
    PhaseSchedule s = build_schedule(4, 4, 2, 3);
    int wl_on = 0;
    for (bool b : s.phases[1].wl) wl_on += b ? 1 : 0;
    CHECK(wl_on == 1);
    CHECK(s.phases[1].wl[2]);

    int sbl_on = 0;
    for (bool b : s.phases[2].s_bl) sbl_on += b ? 1 : 0;
    CHECK(sbl_on == 1);
    CHECK(s.phases[2].s_bl[3]);

    int vdd_cols = 0;
    for (Drive d : s.phases[1].in_bl) vdd_cols += d == Drive::vdd ? 1 : 0;
    CHECK(vdd_cols == 3);
    CHECK(s.phases[1].in_bl[3] == Drive::ground);
}

TEST_CASE("schedule rejects out-of-bounds targets") {
    CHECK_THROWS_AS(build_schedule(2, 2, 2, 0), ConfigError);
    CHECK_THROWS_AS(build_schedule(2, 2, 0, -1), ConfigError);
    CHECK_THROWS_AS(build_schedule(0, 2, 0, 0), ConfigError);
}

TEST_CASE("standard mode excludes the measurement fabric") {
    SignalVector sv;
    sv.wl.assign(2, false);
    sv.s_bl.assign(2, false);
    sv.in_bl.assign(2, Drive::high_z);
    sv.std_mode = true;
    CHECK_NOTHROW(sv.validate(2, 2));

    sv.lec = true;
    CHECK_THROWS_AS(sv.validate(2, 2), ConfigError);
    sv.lec = false;
    sv.prg = true;
    CHECK_THROWS_AS(sv.validate(2, 2), ConfigError);
    sv.prg = false;
    sv.s_bl[1] = true;
    CHECK_THROWS_AS(sv.validate(2, 2), ConfigError);

    SignalVector wrong_dims;
    wrong_dims.wl.assign(1, false);
    wrong_dims.s_bl.assign(2, false);
    wrong_dims.in_bl.assign(2, Drive::high_z);
    CHECK_THROWS_AS(wrong_dims.validate(2, 2), ConfigError);
}

TEST_CASE("equal capacitors share to half the supply") {
    MeasurementOutcome out = measure_single(30.0, 30.0, kVdd);
    CHECK(out.v_gs_V == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(out.elapsed_ns == 40.0);
    CHECK(out.conflict_phases.empty());
}

TEST_CASE("unequal capacitors follow the divider formula") {
    MeasurementOutcome out = measure_single(20.0, 40.0, kVdd);
    CHECK(out.v_gs_V == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out.v_gs_V ==
          doctest::Approx(oracle::v_gs(20.0, 0.0, 40.0, kVdd)).epsilon(1e-12));
}

TEST_CASE("plate parasitic rides along in the divider") {
    ParasiticConfig par;
    par.plate_fF = 6.0;
    MeasurementOutcome out = measure_single(25.0, 30.0, kVdd, par);
    CHECK(out.v_gs_V ==
          doctest::Approx(oracle::v_gs(25.0, 6.0, 30.0, kVdd)).epsilon(1e-12));
}

TEST_CASE("v_gs stays within the rails and tracks c_m strictly") {
    double prev = -1.0;
    for (double c = 2.0; c <= 80.0; c += 3.7) {
        MeasurementOutcome out = measure_single(c, 30.0, kVdd);
        CHECK(out.v_gs_V > prev);
        CHECK(out.v_gs_V >= 0.0);
        CHECK(out.v_gs_V <= kVdd);
        prev = out.v_gs_V;
    }
}

TEST_CASE("after the discharge phase every capacitor is exactly empty") {
    CellMatrix cells(3, 2, 30.0);
    ParasiticConfig par;
    par.plate_fF = 5.0;
    par.bitline_fF = {2.0};
    par.storage_fF = {1.0};
    MacroCell macro = build_macro_cell(cells, par, 30.0);

    MeasureOptions opts;
    bool seen = false;
    opts.observer = [&](int phase, const SignalAssignment&, const CircuitState&,
                        const CircuitState& after) {
        if (phase != 1) return;
        seen = true;
        for (double q : after.cap_charge_fC) CHECK(q == 0.0);
        for (double v : after.node_voltage_V) CHECK(v == 0.0);
    };
    run_measurement(macro, build_schedule(3, 2, 1, 1), kVdd, opts);
    CHECK(seen);
}

TEST_CASE("charge is conserved through every phase of every cell") {
    CellMatrix cells(3, 3, 0.0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cells.set_value(r, c, 18.0 + 4.0 * (3 * r + c));
    ParasiticConfig par;
    par.plate_fF = 3.0;
    par.bitline_fF = {1.5, 0.5, 2.5};
    MacroCell macro = build_macro_cell(cells, par, 30.0);

    MeasureOptions opts;
    opts.observer = make_audit_observer(macro.netlist);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            run_measurement(macro, build_schedule(3, 3, r, c), kVdd, opts);
}

TEST_CASE("trace captures the four solved phases") {
    CellMatrix cells(2, 2, 30.0);
    MacroCell macro = build_macro_cell(cells, {}, 30.0);
    MeasureOptions opts;
    opts.keep_trace = true;
    MeasurementOutcome out = run_measurement(macro, build_schedule(2, 2, 1, 0), kVdd, opts);
    REQUIRE(out.trace.has_value());
    REQUIRE(out.trace->size() == 4);
    CHECK((*out.trace)[0].time_ns == 10.0);
    CHECK((*out.trace)[3].time_ns == 40.0);
    CHECK(out.final_state.time_ns == 40.0);
    CHECK((*out.trace)[3].node_voltage_V[macro.ref_gate.index] == out.v_gs_V);
}

TEST_CASE("measurements of the same cell repeat bit-identically") {
    CellMatrix cells(2, 3, 27.0);
    MacroCell macro = build_macro_cell(cells, {}, 30.0);
    PhaseSchedule sched = build_schedule(2, 3, 1, 2);
    MeasurementOutcome a = run_measurement(macro, sched, kVdd);
    MeasurementOutcome b = run_measurement(macro, sched, kVdd);
    CHECK(a.v_gs_V == b.v_gs_V);
    REQUIRE(a.final_state.node_voltage_V.size() == b.final_state.node_voltage_V.size());
    for (size_t i = 0; i < a.final_state.node_voltage_V.size(); ++i)
        CHECK(a.final_state.node_voltage_V[i] == b.final_state.node_voltage_V[i]);
}

TEST_CASE("the discharge phase erases any prior history") {
    CellMatrix cells(2, 2, 33.0);
    MacroCell macro = build_macro_cell(cells, {}, 30.0);
    PhaseSchedule sched = build_schedule(2, 2, 0, 1);

    MeasurementOutcome fresh = run_measurement(macro, sched, kVdd);

    CircuitState biased = set_standard_mode(macro, kVdd);
    MeasureOptions opts;
    opts.initial = &biased;
    MeasurementOutcome after_bias = run_measurement(macro, sched, kVdd, opts);

    CHECK(fresh.v_gs_V == after_bias.v_gs_V);
}

TEST_CASE("other cells' values cannot influence the target reading") {
    auto measure_target = [](std::vector<double> values) {
        CellMatrix cells(3, 3, std::move(values));
        MacroCell macro = build_macro_cell(cells, {}, 30.0);
        return run_measurement(macro, build_schedule(3, 3, 1, 1), kVdd).v_gs_V;
    };

    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> cap(5.0, 60.0);
    std::vector<double> base(9);
    for (auto& v : base) v = cap(rng);
    base[4] = 30.0; // target (1,1)
    double reference = measure_target(base);
    CHECK(reference == doctest::Approx(oracle::v_gs(30.0, 0.0, 30.0, kVdd)).epsilon(1e-12));

    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> mutated(9);
        for (auto& v : mutated) v = cap(rng);
        mutated[4] = 30.0;
        double v = measure_target(mutated);
        CHECK(std::abs(v - reference) <= 1e-12);
    }
}

TEST_CASE("unselected-column bit-line parasitics cannot influence the reading") {
    // The target column's bit line is driven to ground throughout, so its
    // parasitic is invisible; the unselected columns' bit lines are pulled
    // to the supply during charge and then float, never joining the
    // sharing fabric when the array has ideal (capacitor-free) row mates.
    auto measure_with_bitlines = [](std::vector<double> bitline_fF) {
        CellMatrix cells(1, 3, 30.0);
        cells.set_fault({0, 0, FaultKind::open, 0.0});
        cells.set_fault({0, 2, FaultKind::open, 0.0});
        ParasiticConfig par;
        par.bitline_fF = std::move(bitline_fF);
        MacroCell macro = build_macro_cell(cells, par, 30.0);
        return run_measurement(macro, build_schedule(1, 3, 0, 1), kVdd).v_gs_V;
    };

    double clean = measure_with_bitlines({0.0, 0.0, 0.0});
    double loaded = measure_with_bitlines({9.0, 4.0, 7.0});
    CHECK(std::abs(clean - loaded) <= 1e-12);
    CHECK(clean == doctest::Approx(oracle::v_gs(30.0, 0.0, 30.0, kVdd)).epsilon(1e-12));
}

TEST_CASE("row mates with capacitors couple floating charged bit lines in") {
    // With real row mates the unselected bit lines keep supporting the
    // plate through the mate capacitors in series: the charged parasitic
    // rides into the sharing phase. The closed form pins the effect.
    const double c_bl = 8.0;
    CellMatrix cells(1, 3, 30.0);
    ParasiticConfig par;
    par.bitline_fF = {c_bl};
    MacroCell macro = build_macro_cell(cells, par, 30.0);
    double v = run_measurement(macro, build_schedule(1, 3, 0, 1), kVdd).v_gs_V;

    double expect = oracle::v_gs_with_row_mates(30.0, 0.0, 30.0, kVdd, {30.0, 30.0}, c_bl);
    CHECK(v == doctest::Approx(expect).epsilon(1e-12));
    CHECK(v > oracle::v_gs(30.0, 0.0, 30.0, kVdd));
}

TEST_CASE("a shorted target reads zero through a held conflict phase") {
    CellMatrix cells(2, 2, 30.0);
    cells.set_fault({0, 1, FaultKind::shorted, 0.0});
    MacroCell macro = build_macro_cell(cells, {}, 30.0);

    MeasurementOutcome out = run_measurement(macro, build_schedule(2, 2, 0, 1), kVdd);
    CHECK(out.v_gs_V == 0.0);
    REQUIRE(!out.conflict_phases.empty());
    CHECK(out.conflict_phases.front() == 2);

    // the raw netlist error stays visible at the lower layer
    SignalAssignment p2 = lower_signals(macro, build_schedule(2, 2, 0, 1).phases[1], kVdd);
    CHECK_THROWS_AS(apply_switches(macro.netlist, p2, macro.netlist.initial_state()),
                    SourceConflictError);
}

TEST_CASE("standard mode pins the plate to half the supply") {
    CellMatrix cells(2, 2, 30.0);
    MacroCell macro = build_macro_cell(cells, {}, 30.0);

    CircuitState st = set_standard_mode(macro, 1.8);
    CHECK(st.node_voltage_V[macro.plate.index] == doctest::Approx(0.9).epsilon(1e-12));

    CircuitState st12 = set_standard_mode(macro, 1.2);
    CHECK(st12.node_voltage_V[macro.plate.index] == doctest::Approx(0.6).epsilon(1e-12));

    // re-applying the bias is a fixed point
    CircuitState again = set_standard_mode(macro, 1.8, &st);
    for (size_t i = 0; i < st.node_voltage_V.size(); ++i)
        CHECK(again.node_voltage_V[i] == st.node_voltage_V[i]);
}

TEST_CASE("run_measurement validates its inputs") {
    CellMatrix cells(2, 2, 30.0);
    MacroCell macro = build_macro_cell(cells, {}, 30.0);
    CHECK_THROWS_AS(run_measurement(macro, build_schedule(2, 2, 0, 0), 0.0), ConfigError);
    CHECK_THROWS_AS(run_measurement(macro, build_schedule(3, 2, 2, 0), kVdd), ConfigError);
}
