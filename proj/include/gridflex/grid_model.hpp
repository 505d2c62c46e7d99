#pragma once

// Radial network types and the exact branch-flow oracle.
//
// Conventions: voltages and currents are stored in p.u.; the branch-flow state
// uses squared magnitudes (v = |V|^2, l = |I|^2). Injections are positive for
// generation. Branch flows are measured at the upstream (sending) end, and the
// slack exchange is positive when power is imported into the feeder.

#include <string>
#include <vector>

namespace gridflex {

struct Node {
    std::string id;
    double vmin = 0.9;  // |V| p.u.
    double vmax = 1.1;
    friend bool operator==(const Node&, const Node&) = default;
};

struct Branch {
    std::string from;
    std::string to;
    double r = 0.0;
    double x = 0.0;
    double imax = 1.0;

    std::string name() const { return from + "->" + to; }
    friend bool operator==(const Branch&, const Branch&) = default;
};

struct TransformerLink {
    std::string mv_node;
    std::string lv_grid;
    friend bool operator==(const TransformerLink&, const TransformerLink&) = default;
};

struct MvNetwork {
    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::string slack;
    std::vector<TransformerLink> links;
    double base_kva = 1000.0;
    double base_v = 20000.0;

    int node_index(const std::string& id) const;  // -1 if absent
    friend bool operator==(const MvNetwork&, const MvNetwork&) = default;
};

enum class ViolationKind {
    RadialityViolated,
    Disconnected,
    NonPositiveAmpacity,
    NegativeResistance,
    NonFiniteImpedance,
    BadVoltageLimits,
    SlackMissing,
    DuplicateNode,
    UnknownNode,
    SelfLoop,
    DuplicateLvGrid,
    BadBase,
};

std::string to_string(ViolationKind k);

struct Violation {
    ViolationKind kind;
    std::string element;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(ViolationKind k) const;
};

/// Checks node/branch tables of any radial grid rooted at `root`.
ValidationReport validate_radial(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                                 const std::string& root);
ValidationReport validate_network(const MvNetwork& net);

/// Breadth-first orientation of a validated radial grid.
struct RadialTopology {
    int root = -1;
    std::vector<int> order;          // nodes, root first
    std::vector<int> parent_branch;  // per node, -1 at the root
    std::vector<int> upstream;       // per branch: sending-end node
    std::vector<int> downstream;     // per branch: receiving-end node
    std::vector<std::vector<int>> children;  // per node: outgoing branches
};

RadialTopology build_topology(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                              const std::string& root);

struct NodeInjection {
    std::string node;
    double pg = 0.0;
    double pc = 0.0;
    double qg = 0.0;
    double qc = 0.0;
};

/// Power withdrawn by an MV/LV transformer (p.u.), indexed like MvNetwork::links.
struct LinkFlow {
    double p = 0.0;
    double q = 0.0;
};

struct MvState {
    std::vector<double> v;  // per node
    std::vector<double> l;  // per branch
    std::vector<double> P;
    std::vector<double> Q;
    std::vector<double> p_lv;  // per transformer link
    std::vector<double> q_lv;
    double p_slack = 0.0;
    double q_slack = 0.0;
    int sweeps = 0;

    double losses(const std::vector<Branch>& branches) const;
};

struct SweepOptions {
    double tolerance = 1e-12;
    int max_sweeps = 200;
};

/// Backward/forward sweep on any radial grid. Net injections are per node
/// (generation positive); the root voltage is fixed at root_v (squared).
/// Throws Error(NonConvergence) on divergence or when the sweep limit is hit.
MvState radial_power_flow(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                          const RadialTopology& topo, const std::vector<double>& p_inj,
                          const std::vector<double>& q_inj, double root_v,
                          const SweepOptions& opt = {});

MvState solve_distflow_fixed_point(const MvNetwork& net, const std::vector<NodeInjection>& inj,
                                   double slack_v, const std::vector<LinkFlow>& lv = {},
                                   const SweepOptions& opt = {});

/// Largest violation of the nodal balance, voltage-drop and branch-flow
/// equalities for a state of `net` with the given injections.
double distflow_residual(const MvNetwork& net, const std::vector<NodeInjection>& inj,
                         const std::vector<LinkFlow>& lv, const MvState& s);

struct PhysicalBranch {
    std::string from;
    std::string to;
    double r_ohm;
    double x_ohm;
    double imax_a;
};

struct PhysicalNetwork {
    std::vector<Node> nodes;
    std::vector<PhysicalBranch> branches;
    std::string slack;
    std::vector<TransformerLink> links;
    double base_kva;
    double base_v;  // line-to-line
};

PhysicalNetwork to_physical(const MvNetwork& net);
MvNetwork from_physical(const PhysicalNetwork& phys);

} // namespace gridflex
