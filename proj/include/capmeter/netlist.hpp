#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace capmeter {

// Index into Netlist::node_names(). Node 0 is always ground.
struct NodeId {
    int index = -1;
    constexpr bool valid() const { return index >= 0; }
    friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline constexpr NodeId kGround{0};

struct CapacitorElement {
    NodeId node_a;
    NodeId node_b;
    double value_fF = 0.0;
    std::string label;
};

// Ideal switch: closed means node_a and node_b become one electrical node.
struct SwitchElement {
    NodeId node_a;
    NodeId node_b;
    std::string control;
    bool closed_by_default = false;
};

// Ideal voltage source attached to one node, switchable to high impedance.
struct SourceElement {
    NodeId node;
    std::string name;
    double default_voltage_V = 0.0;
    bool active_by_default = false;
};

// Control values for one solve: which switches conduct and what each
// source drives. A source mapped to nullopt is high impedance.
struct SignalAssignment {
    std::map<std::string, bool> switch_closed;
    std::map<std::string, std::optional<double>> source_drive_V;
};

// Snapshot of the network between switching events. Charge is stored per
// capacitor with the convention q = value_fF * (v_a - v_b).
struct CircuitState {
    std::vector<double> node_voltage_V;
    std::vector<double> cap_charge_fC;
    double time_ns = 0.0;
};

class Netlist {
public:
    Netlist();

    NodeId add_node(const std::string& name);
    NodeId node(const std::string& name) const;
    std::optional<NodeId> find_node(const std::string& name) const;

    int add_capacitor(NodeId a, NodeId b, double value_fF, std::string label = {});
    void add_switch(NodeId a, NodeId b, std::string control, bool closed_by_default = false);
    void add_source(NodeId node, std::string name, double default_voltage_V = 0.0,
                    bool active_by_default = false);

    int node_count() const { return static_cast<int>(node_names_.size()); }
    const std::vector<std::string>& node_names() const { return node_names_; }
    const std::vector<CapacitorElement>& capacitors() const { return capacitors_; }
    const std::vector<SwitchElement>& switches() const { return switches_; }
    const std::vector<SourceElement>& sources() const { return sources_; }

    // Assignment built from the per-element defaults.
    SignalAssignment default_assignment() const;

    // All nodes at 0 V, all capacitors empty, t = 0.
    CircuitState initial_state() const;

private:
    std::vector<std::string> node_names_;
    std::map<std::string, int> node_index_;
    std::vector<CapacitorElement> capacitors_;
    std::vector<SwitchElement> switches_;
    std::vector<SourceElement> sources_;
};

// Applies a switching event: merges nodes joined by closed switches, pins
// source-driven groups, and redistributes the trapped charge of the rest so
// that every connected component keeps its pre-event total charge. Groups
// with no capacitive path to a driven group keep their previous potential.
// Throws SourceConflictError when two active sources disagree on one group,
// ConfigError when the assignment names are incomplete or unknown.
CircuitState apply_switches(const Netlist& netlist, const SignalAssignment& signals,
                            const CircuitState& before);

// Effective capacitance seen from `node` toward all source-pinned groups
// under the given switch setting (sources count as small-signal ground).
// Throws CircuitError if `node` itself is pinned.
double component_capacitance(const Netlist& netlist, NodeId node,
                             const SignalAssignment& signals);

// Largest charge-conservation violation between two states, evaluated per
// connected component of `signals`, ignoring components pinned by a source
// (those exchange charge with their source). abs in fC, rel against the
// total absolute plate charge of the component.
struct ChargeAudit {
    double max_abs_fC = 0.0;
    double max_rel = 0.0;
};
ChargeAudit audit_charge_conservation(const Netlist& netlist, const SignalAssignment& signals,
                                      const CircuitState& before, const CircuitState& after);

Netlist netlist_from_json(const nlohmann::json& doc);
nlohmann::json netlist_to_json(const Netlist& netlist);

} // namespace capmeter
