#include "capmeter/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "capmeter/errors.hpp"
#include "capmeter/pipeline.hpp"

namespace capmeter {

namespace {

void append_double(std::string& out, const char* key, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s=%.17g;", key, v);
    out += buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

// Calibration runs on a lone cell; only the shared-plate parasitic can
// reach its measurement path (the target bit line and storage node are
// pinned throughout).
ParasiticConfig calibration_parasitics(const ParasiticConfig& parasitics) {
    ParasiticConfig p;
    p.plate_fF = parasitics.plate_fF;
    return p;
}

int pipeline_step(double c_m_fF, const ConverterParams& params,
                  const ParasiticConfig& parasitics) {
    CellMatrix one(1, 1, c_m_fF);
    MacroCell macro = build_macro_cell(one, calibration_parasitics(parasitics), params.c_ref_fF);
    return measure_cell(macro, 0, 0, params).conversion.step;
}

} // namespace

void SweepSpec::validate() const {
    if (!(c_min_fF >= 0.0)) throw ConfigError("sweep lower bound must be >= 0 fF");
    if (!(c_min_fF < c_max_fF)) throw ConfigError("sweep requires c_min < c_max");
    if (!(resolution_fF > 0.0)) throw ConfigError("sweep resolution must be positive");
}

Abacus::Abacus(std::vector<AbacusEntry> entries, std::vector<AbacusBin> bins, SweepSpec sweep,
               int n_steps, std::string fingerprint)
    : entries_(std::move(entries)), bins_(std::move(bins)), sweep_(sweep), n_steps_(n_steps),
      fingerprint_(std::move(fingerprint)) {}

const AbacusBin* Abacus::bin(int step) const {
    for (const auto& b : bins_)
        if (b.step == step) return &b;
    return nullptr;
}

std::string params_fingerprint(const ConverterParams& params, const ParasiticConfig& parasitics) {
    std::string canon;
    append_double(canon, "c_ref_fF", params.c_ref_fF);
    append_double(canon, "v_dd_V", params.v_dd_V);
    append_double(canon, "v_t_V", params.v_t_V);
    append_double(canon, "k_uA_per_V2", params.k_uA_per_V2);
    append_double(canon, "delta_i_uA", params.delta_i_uA);
    canon += "n_steps=" + std::to_string(params.n_steps) + ";";
    append_double(canon, "inverter_threshold_V", params.inverter_threshold_V);
    append_double(canon, "plate_fF", parasitics.plate_fF);
    canon += "bitline_fF=[";
    for (double v : parasitics.bitline_fF) append_double(canon, "", v);
    canon += "];storage_fF=[";
    for (double v : parasitics.storage_fF) append_double(canon, "", v);
    canon += "];";

    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return hex;
}

ConverterParams auto_size_delta_i(ConverterParams params, double c_top_fF,
                                  const ParasiticConfig& parasitics) {
    if (c_top_fF <= 0.0) throw ConfigError("full-scale capacitance must be positive");
    CellMatrix one(1, 1, c_top_fF);
    MacroCell macro = build_macro_cell(one, calibration_parasitics(parasitics), params.c_ref_fF);
    PhaseSchedule schedule = build_schedule(1, 1, 0, 0);
    MeasurementOutcome top = run_measurement(macro, schedule, params.v_dd_V);
    params.delta_i_uA = sized_delta_i_uA(top.v_gs_V, params);
    return params;
}

Abacus build_abacus(const ConverterParams& params, const SweepSpec& sweep,
                    const ParasiticConfig& parasitics) {
    params.validate();
    sweep.validate();

    std::vector<AbacusEntry> entries;
    const double guard = sweep.resolution_fF * 1e-9;
    for (int i = 0;; ++i) {
        double c = sweep.c_min_fF + i * sweep.resolution_fF;
        if (c > sweep.c_max_fF + guard) break;
        entries.push_back({c, pipeline_step(c, params, parasitics)});
    }

    for (size_t i = 1; i < entries.size(); ++i)
        if (entries[i].step < entries[i - 1].step)
            throw CalibrationError(
                "step curve decreases at " + std::to_string(entries[i].c_m_fF) +
                " fF; the ramp step is mis-sized or the device parameters are inconsistent");

    // Half-open partition of the swept span: each bin ends where the next
    // step begins; the last bin closes on the final swept point.
    std::vector<AbacusBin> bins;
    const double last_c = entries.back().c_m_fF;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (i == 0 || entries[i].step != entries[i - 1].step)
            bins.push_back({entries[i].step, entries[i].c_m_fF, last_c});
        if (i > 0 && entries[i].step != entries[i - 1].step)
            bins[bins.size() - 2].c_hi_fF = entries[i].c_m_fF;
    }

    return Abacus(std::move(entries), std::move(bins), sweep, params.n_steps,
                  params_fingerprint(params, parasitics));
}

CapEstimate estimate_capacitance(const Abacus& abacus, int step) {
    if (step < 0 || step > abacus.n_steps())
        throw ConfigError("step " + std::to_string(step) + " is outside [0, " +
                          std::to_string(abacus.n_steps()) + "]");

    const auto& bins = abacus.bins();
    CapEstimate est;
    if (step == 0) {
        est.flag = RangeFlag::under_range;
        est.lo_fF = 0.0;
        for (const auto& b : bins)
            if (b.step > 0) {
                est.hi_fF = b.c_lo_fF;
                break;
            }
        return est;
    }
    if (step == abacus.n_steps()) {
        est.flag = RangeFlag::over_range;
        const AbacusBin* b = abacus.bin(step);
        est.lo_fF = b ? b->c_lo_fF : abacus.sweep().c_max_fF;
        return est;
    }

    const AbacusBin* b = abacus.bin(step);
    if (!b)
        throw CalibrationError("step " + std::to_string(step) +
                               " was never reached by the calibration sweep");
    est.flag = RangeFlag::in_range;
    est.lo_fF = b->c_lo_fF;
    est.hi_fF = b->c_hi_fF;
    est.point_fF = 0.5 * (b->c_lo_fF + b->c_hi_fF);
    return est;
}

AccuracyReport accuracy_report(const Abacus& abacus) {
    AccuracyReport rep;
    rep.span_fF = abacus.sweep().c_max_fF - abacus.sweep().c_min_fF;

    std::map<int, StepAccuracy> per_step;
    std::vector<double> rels;
    std::vector<double> fulls;
    bool covered = false;
    for (const auto& e : abacus.entries()) {
        if (e.step <= 0 || e.step >= abacus.n_steps()) continue;
        CapEstimate est = estimate_capacitance(abacus, e.step);
        double err = std::abs(*est.point_fF - e.c_m_fF);
        double rel = err / e.c_m_fF;
        double full = err / rep.span_fF;
        auto& s = per_step[e.step];
        s.step = e.step;
        s.max_rel_error = std::max(s.max_rel_error, rel);
        s.max_full_scale_error = std::max(s.max_full_scale_error, full);
        rels.push_back(rel);
        fulls.push_back(full);
        if (!covered) {
            rep.covered_lo_fF = e.c_m_fF;
            covered = true;
        }
        rep.covered_hi_fF = e.c_m_fF;
    }
    for (auto& [step, acc] : per_step) rep.per_step.push_back(acc);

    auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    if (!rels.empty()) {
        rep.max_rel_error = *std::max_element(rels.begin(), rels.end());
        rep.max_full_scale_error = *std::max_element(fulls.begin(), fulls.end());
        rep.median_rel_error = median(rels);
        rep.median_full_scale_error = median(fulls);
    }
    return rep;
}

nlohmann::json abacus_to_json(const Abacus& abacus, const ConverterParams& params,
                              const ParasiticConfig& parasitics) {
    nlohmann::json doc;
    doc["format"] = "capmeter-abacus-v1";
    doc["fingerprint"] = abacus.fingerprint();
    doc["n_steps"] = abacus.n_steps();
    doc["sweep"] = {{"c_min_fF", abacus.sweep().c_min_fF},
                    {"c_max_fF", abacus.sweep().c_max_fF},
                    {"resolution_fF", abacus.sweep().resolution_fF}};
    doc["converter"] = {{"c_ref_fF", params.c_ref_fF},
                        {"v_dd_V", params.v_dd_V},
                        {"v_t_V", params.v_t_V},
                        {"k_uA_per_V2", params.k_uA_per_V2},
                        {"delta_i_uA", params.delta_i_uA},
                        {"n_steps", params.n_steps},
                        {"inverter_threshold_V", params.inverter_threshold_V}};
    doc["parasitics"] = {{"plate_fF", parasitics.plate_fF},
                         {"bitline_fF", parasitics.bitline_fF},
                         {"storage_fF", parasitics.storage_fF}};
    auto bins = nlohmann::json::array();
    for (const auto& b : abacus.bins())
        bins.push_back({{"step", b.step}, {"c_lo_fF", b.c_lo_fF}, {"c_hi_fF", b.c_hi_fF}});
    doc["bins"] = std::move(bins);
    return doc;
}

Abacus abacus_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("format", std::string{}) != "capmeter-abacus-v1")
        throw ConfigError("not a capmeter abacus document");
    SweepSpec sweep;
    const auto& s = doc.at("sweep");
    sweep.c_min_fF = s.at("c_min_fF").get<double>();
    sweep.c_max_fF = s.at("c_max_fF").get<double>();
    sweep.resolution_fF = s.at("resolution_fF").get<double>();
    sweep.validate();

    std::vector<AbacusBin> bins;
    int prev_step = -1;
    for (const auto& item : doc.at("bins")) {
        AbacusBin b;
        b.step = item.at("step").get<int>();
        b.c_lo_fF = item.at("c_lo_fF").get<double>();
        b.c_hi_fF = item.at("c_hi_fF").get<double>();
        if (b.step <= prev_step) throw ConfigError("abacus bins must have increasing steps");
        prev_step = b.step;
        bins.push_back(b);
    }
    return Abacus({}, std::move(bins), sweep, doc.at("n_steps").get<int>(),
                  doc.at("fingerprint").get<std::string>());
}

std::string abacus_to_csv(const Abacus& abacus) {
    std::string out = "c_m_fF,step\n";
    char line[64];
    for (const auto& e : abacus.entries()) {
        std::snprintf(line, sizeof line, "%.4f,%d\n", e.c_m_fF, e.step);
        out += line;
    }
    return out;
}

nlohmann::json accuracy_to_json(const AccuracyReport& rep) {
    nlohmann::json doc;
    doc["span_fF"] = rep.span_fF;
    doc["covered_lo_fF"] = rep.covered_lo_fF;
    doc["covered_hi_fF"] = rep.covered_hi_fF;
    doc["max_rel_error"] = rep.max_rel_error;
    doc["median_rel_error"] = rep.median_rel_error;
    doc["max_full_scale_error"] = rep.max_full_scale_error;
    doc["median_full_scale_error"] = rep.median_full_scale_error;
    auto steps = nlohmann::json::array();
    for (const auto& s : rep.per_step)
        steps.push_back({{"step", s.step},
                         {"max_rel_error", s.max_rel_error},
                         {"max_full_scale_error", s.max_full_scale_error}});
    doc["per_step"] = std::move(steps);
    return doc;
}

} // namespace capmeter
