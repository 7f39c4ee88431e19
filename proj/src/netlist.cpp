#include "capmeter/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    // Smaller index wins, so representatives are deterministic.
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);
        parent[b] = a;
    }
};

// Connected components under one switch setting, with the source pinning
// resolved. Component ids are dense and ordered by smallest member node.
struct Resolution {
    std::vector<int> comp_of_node;
    std::vector<int> rep_node;                    // per component
    std::vector<std::optional<double>> driven_V;  // per component
    int n_comps = 0;
};

Resolution resolve(const Netlist& netlist, const SignalAssignment& signals) {
    UnionFind uf(netlist.node_count());
    std::set<std::string> known;
    for (const auto& sw : netlist.switches()) {
        known.insert(sw.control);
        auto it = signals.switch_closed.find(sw.control);
        if (it == signals.switch_closed.end())
            throw ConfigError("signal assignment misses switch control '" + sw.control + "'");
        if (it->second) uf.unite(sw.node_a.index, sw.node_b.index);
    }
    for (const auto& [control, closed] : signals.switch_closed)
        if (!known.count(control))
            throw ConfigError("signal assignment names unknown switch control '" + control + "'");

    Resolution r;
    r.comp_of_node.assign(netlist.node_count(), -1);
    std::vector<int> comp_of_root(netlist.node_count(), -1);
    for (int n = 0; n < netlist.node_count(); ++n) {
        int root = uf.find(n);
        if (comp_of_root[root] < 0) {
            comp_of_root[root] = r.n_comps++;
            r.rep_node.push_back(root);
        }
        r.comp_of_node[n] = comp_of_root[root];
    }

    r.driven_V.assign(r.n_comps, std::nullopt);
    r.driven_V[r.comp_of_node[kGround.index]] = 0.0;
    known.clear();
    for (const auto& src : netlist.sources()) known.insert(src.name);
    for (const auto& [name, drive] : signals.source_drive_V)
        if (!known.count(name))
            throw ConfigError("signal assignment names unknown source '" + name + "'");
    for (const auto& src : netlist.sources()) {
        auto it = signals.source_drive_V.find(src.name);
        if (it == signals.source_drive_V.end())
            throw ConfigError("signal assignment misses source '" + src.name + "'");
        if (!it->second.has_value()) continue;
        double v = *it->second;
        auto& pin = r.driven_V[r.comp_of_node[src.node.index]];
        if (pin.has_value() && *pin != v)
            throw SourceConflictError("source '" + src.name + "' drives " + std::to_string(v) +
                                      " V onto a component already pinned to " +
                                      std::to_string(*pin) + " V");
        pin = v;
    }
    return r;
}

// Solves every floating component's voltage by charge conservation.
// `old_voltage` supplies the gauge for capacitively unanchored groups,
// `old_charge` the conserved per-capacitor plate charges.
std::vector<double> solve_floating(const Netlist& netlist, const Resolution& r,
                                   const std::vector<double>& old_charge,
                                   const std::vector<double>& old_voltage) {
    std::vector<double> comp_V(r.n_comps, 0.0);
    for (int c = 0; c < r.n_comps; ++c)
        if (r.driven_V[c]) comp_V[c] = *r.driven_V[c];

    // Cluster floating components that exchange charge with each other.
    UnionFind cuf(r.n_comps);
    const auto& caps = netlist.capacitors();
    for (const auto& cap : caps) {
        if (cap.value_fF <= 0.0) continue;
        int ca = r.comp_of_node[cap.node_a.index];
        int cb = r.comp_of_node[cap.node_b.index];
        if (ca != cb && !r.driven_V[ca] && !r.driven_V[cb]) cuf.unite(ca, cb);
    }

    std::map<int, std::vector<int>> clusters; // root -> member comps, ascending
    for (int c = 0; c < r.n_comps; ++c)
        if (!r.driven_V[c]) clusters[cuf.find(c)].push_back(c);
    if (clusters.empty()) return comp_V;

    std::map<int, std::vector<int>> cluster_caps;
    std::map<int, bool> anchored;
    for (auto& [root, members] : clusters) anchored[root] = false;
    for (int k = 0; k < static_cast<int>(caps.size()); ++k) {
        const auto& cap = caps[k];
        if (cap.value_fF <= 0.0) continue;
        int ca = r.comp_of_node[cap.node_a.index];
        int cb = r.comp_of_node[cap.node_b.index];
        if (ca == cb) continue;
        bool fa = !r.driven_V[ca];
        bool fb = !r.driven_V[cb];
        if (!fa && !fb) continue;
        int root = cuf.find(fa ? ca : cb);
        cluster_caps[root].push_back(k);
        if (fa != fb) anchored[root] = true;
    }

    for (auto& [root, members] : clusters) {
        const int m = static_cast<int>(members.size());
        std::map<int, int> local; // comp id -> row
        for (int i = 0; i < m; ++i) local[members[i]] = i;

        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        for (int k : cluster_caps[root]) {
            const auto& cap = caps[k];
            int ca = r.comp_of_node[cap.node_a.index];
            int cb = r.comp_of_node[cap.node_b.index];
            const double C = cap.value_fF;
            const double q = old_charge[k];
            auto ia = local.find(ca);
            auto ib = local.find(cb);
            if (ia != local.end()) {
                A(ia->second, ia->second) += C;
                b(ia->second) += q;
                if (ib != local.end())
                    A(ia->second, ib->second) -= C;
                else
                    b(ia->second) += C * comp_V[cb];
            }
            if (ib != local.end()) {
                A(ib->second, ib->second) += C;
                b(ib->second) -= q;
                if (ia != local.end())
                    A(ib->second, ia->second) -= C;
                else
                    b(ib->second) += C * comp_V[ca];
            }
        }

        if (!anchored[root]) {
            // Rank-deficient by exactly one: the group's total charge is
            // conserved for any common offset. Pin the representative to
            // its previous potential.
            A.row(0).setZero();
            A(0, 0) = 1.0;
            b(0) = old_voltage[r.rep_node[members[0]]];
        }

        if (m == 1) {
            comp_V[members[0]] = b(0) / A(0, 0);
        } else {
            Eigen::VectorXd u = A.partialPivLu().solve(b);
            for (int i = 0; i < m; ++i) comp_V[members[i]] = u(i);
        }
    }
    return comp_V;
}

void check_state_shape(const Netlist& netlist, const CircuitState& state) {
    if (static_cast<int>(state.node_voltage_V.size()) != netlist.node_count() ||
        state.cap_charge_fC.size() != netlist.capacitors().size())
        throw ConfigError("circuit state does not match the netlist shape");
}

} // namespace

Netlist::Netlist() { add_node("gnd"); }

NodeId Netlist::add_node(const std::string& name) {
    if (name.empty()) throw ConfigError("node name must not be empty");
    auto [it, inserted] = node_index_.emplace(name, node_count());
    if (!inserted) throw ConfigError("duplicate node name '" + name + "'");
    node_names_.push_back(name);
    return NodeId{it->second};
}

NodeId Netlist::node(const std::string& name) const {
    auto found = find_node(name);
    if (!found) throw ConfigError("unknown node '" + name + "'");
    return *found;
}

std::optional<NodeId> Netlist::find_node(const std::string& name) const {
    auto it = node_index_.find(name);
    if (it == node_index_.end()) return std::nullopt;
    return NodeId{it->second};
}

namespace {
void check_node(const Netlist& nl, NodeId id, const char* what) {
    if (!id.valid() || id.index >= nl.node_count())
        throw ConfigError(std::string(what) + " references a node outside the netlist");
}
} // namespace

int Netlist::add_capacitor(NodeId a, NodeId b, double value_fF, std::string label) {
    check_node(*this, a, "capacitor");
    check_node(*this, b, "capacitor");
    if (value_fF < 0.0) throw ConfigError("capacitor value must be >= 0 fF");
    capacitors_.push_back({a, b, value_fF, std::move(label)});
    return static_cast<int>(capacitors_.size()) - 1;
}

void Netlist::add_switch(NodeId a, NodeId b, std::string control, bool closed_by_default) {
    check_node(*this, a, "switch");
    check_node(*this, b, "switch");
    if (control.empty()) throw ConfigError("switch control name must not be empty");
    switches_.push_back({a, b, std::move(control), closed_by_default});
}

void Netlist::add_source(NodeId node, std::string name, double default_voltage_V,
                         bool active_by_default) {
    check_node(*this, node, "source");
    if (name.empty()) throw ConfigError("source name must not be empty");
    for (const auto& src : sources_)
        if (src.name == name) throw ConfigError("duplicate source name '" + name + "'");
    sources_.push_back({node, std::move(name), default_voltage_V, active_by_default});
}

SignalAssignment Netlist::default_assignment() const {
    SignalAssignment a;
    for (const auto& sw : switches_) {
        auto [it, inserted] = a.switch_closed.emplace(sw.control, sw.closed_by_default);
        if (!inserted && it->second != sw.closed_by_default)
            throw ConfigError("switches sharing control '" + sw.control +
                              "' disagree on the default position");
    }
    for (const auto& src : sources_)
        a.source_drive_V[src.name] =
            src.active_by_default ? std::optional<double>(src.default_voltage_V) : std::nullopt;
    return a;
}

CircuitState Netlist::initial_state() const {
    CircuitState s;
    s.node_voltage_V.assign(node_count(), 0.0);
    s.cap_charge_fC.assign(capacitors_.size(), 0.0);
    return s;
}

CircuitState apply_switches(const Netlist& netlist, const SignalAssignment& signals,
                            const CircuitState& before) {
    check_state_shape(netlist, before);
    Resolution r = resolve(netlist, signals);
    std::vector<double> comp_V =
        solve_floating(netlist, r, before.cap_charge_fC, before.node_voltage_V);

    CircuitState after;
    after.time_ns = before.time_ns;
    after.node_voltage_V.resize(netlist.node_count());
    for (int n = 0; n < netlist.node_count(); ++n)
        after.node_voltage_V[n] = comp_V[r.comp_of_node[n]];

    const auto& caps = netlist.capacitors();
    after.cap_charge_fC.resize(caps.size());
    for (size_t k = 0; k < caps.size(); ++k)
        after.cap_charge_fC[k] =
            caps[k].value_fF * (after.node_voltage_V[caps[k].node_a.index] -
                                after.node_voltage_V[caps[k].node_b.index]);
    return after;
}

double component_capacitance(const Netlist& netlist, NodeId node,
                             const SignalAssignment& signals) {
    check_node(netlist, node, "capacitance query");
    Resolution r = resolve(netlist, signals);
    const int qc = r.comp_of_node[node.index];
    if (r.driven_V[qc])
        throw CircuitError("capacitance query on a source-pinned component");

    // Small-signal probe: 1 V on the queried component, every pinned
    // component grounded, no stored charge anywhere.
    for (auto& pin : r.driven_V)
        if (pin) pin = 0.0;
    r.driven_V[qc] = 1.0;
    std::vector<double> no_charge(netlist.capacitors().size(), 0.0);
    std::vector<double> zero_voltage(netlist.node_count(), 0.0);
    std::vector<double> comp_V = solve_floating(netlist, r, no_charge, zero_voltage);

    double c_eff = 0.0;
    for (const auto& cap : netlist.capacitors()) {
        int ca = r.comp_of_node[cap.node_a.index];
        int cb = r.comp_of_node[cap.node_b.index];
        if ((ca == qc) == (cb == qc)) continue;
        double v_far = comp_V[ca == qc ? cb : ca];
        c_eff += cap.value_fF * (1.0 - v_far);
    }
    return c_eff;
}

ChargeAudit audit_charge_conservation(const Netlist& netlist, const SignalAssignment& signals,
                                      const CircuitState& before, const CircuitState& after) {
    check_state_shape(netlist, before);
    check_state_shape(netlist, after);
    Resolution r = resolve(netlist, signals);

    std::vector<double> q_before(r.n_comps, 0.0);
    std::vector<double> q_after(r.n_comps, 0.0);
    std::vector<double> scale(r.n_comps, 0.0);
    const auto& caps = netlist.capacitors();
    for (size_t k = 0; k < caps.size(); ++k) {
        int ca = r.comp_of_node[caps[k].node_a.index];
        int cb = r.comp_of_node[caps[k].node_b.index];
        if (ca == cb) continue;
        q_before[ca] += before.cap_charge_fC[k];
        q_before[cb] -= before.cap_charge_fC[k];
        q_after[ca] += after.cap_charge_fC[k];
        q_after[cb] -= after.cap_charge_fC[k];
        double m = std::abs(before.cap_charge_fC[k]) + std::abs(after.cap_charge_fC[k]);
        scale[ca] += m;
        scale[cb] += m;
    }

    ChargeAudit audit;
    for (int c = 0; c < r.n_comps; ++c) {
        if (r.driven_V[c]) continue; // pinned groups trade charge with their source
        double abs_err = std::abs(q_after[c] - q_before[c]);
        audit.max_abs_fC = std::max(audit.max_abs_fC, abs_err);
        audit.max_rel = std::max(audit.max_rel, abs_err / std::max(scale[c], 1.0));
    }
    return audit;
}

Netlist netlist_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("netlist document must be a JSON object");
    Netlist nl;
    if (doc.contains("nodes")) {
        if (!doc["nodes"].is_array()) throw ConfigError("'nodes' must be an array of names");
        bool first = true;
        for (const auto& item : doc["nodes"]) {
            if (!item.is_string()) throw ConfigError("'nodes' entries must be strings");
            std::string name = item.get<std::string>();
            if (first) {
                if (name != "gnd") throw ConfigError("the first node must be 'gnd'");
                first = false;
                continue;
            }
            nl.add_node(name);
        }
    }
    auto node_of = [&nl](const nlohmann::json& j, const char* field) {
        if (!j.is_string()) throw ConfigError(std::string(field) + " must be a node name");
        return nl.node(j.get<std::string>());
    };
    for (const auto& item : doc.value("capacitors", nlohmann::json::array())) {
        nl.add_capacitor(node_of(item.at("a"), "capacitor terminal"),
                         node_of(item.at("b"), "capacitor terminal"),
                         item.at("value_fF").get<double>(), item.value("label", std::string{}));
    }
    for (const auto& item : doc.value("switches", nlohmann::json::array())) {
        nl.add_switch(node_of(item.at("a"), "switch terminal"),
                      node_of(item.at("b"), "switch terminal"),
                      item.at("control").get<std::string>(), item.value("closed", false));
    }
    for (const auto& item : doc.value("sources", nlohmann::json::array())) {
        nl.add_source(node_of(item.at("node"), "source node"),
                      item.at("name").get<std::string>(), item.value("voltage_V", 0.0),
                      item.value("active", false));
    }
    return nl;
}

nlohmann::json netlist_to_json(const Netlist& netlist) {
    nlohmann::json doc;
    doc["nodes"] = netlist.node_names();
    auto caps = nlohmann::json::array();
    for (const auto& c : netlist.capacitors()) {
        nlohmann::json j{{"a", netlist.node_names()[c.node_a.index]},
                         {"b", netlist.node_names()[c.node_b.index]},
                         {"value_fF", c.value_fF}};
        if (!c.label.empty()) j["label"] = c.label;
        caps.push_back(std::move(j));
    }
    doc["capacitors"] = std::move(caps);
    auto sws = nlohmann::json::array();
    for (const auto& s : netlist.switches())
        sws.push_back({{"a", netlist.node_names()[s.node_a.index]},
                       {"b", netlist.node_names()[s.node_b.index]},
                       {"control", s.control},
                       {"closed", s.closed_by_default}});
    doc["switches"] = std::move(sws);
    auto srcs = nlohmann::json::array();
    for (const auto& s : netlist.sources())
        srcs.push_back({{"node", netlist.node_names()[s.node.index]},
                        {"name", s.name},
                        {"voltage_V", s.default_voltage_V},
                        {"active", s.active_by_default}});
    doc["sources"] = std::move(srcs);
    return doc;
}

} // namespace capmeter
