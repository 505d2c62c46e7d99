#include "gridflex/grid_model.hpp"

#include "gridflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace gridflex {

int MvNetwork::node_index(const std::string& id) const
{
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id)
            return static_cast<int>(i);
    return -1;
}

std::string to_string(ViolationKind k)
{
    switch (k) {
    case ViolationKind::RadialityViolated: return "RadialityViolated";
    case ViolationKind::Disconnected: return "Disconnected";
    case ViolationKind::NonPositiveAmpacity: return "NonPositiveAmpacity";
    case ViolationKind::NegativeResistance: return "NegativeResistance";
    case ViolationKind::NonFiniteImpedance: return "NonFiniteImpedance";
    case ViolationKind::BadVoltageLimits: return "BadVoltageLimits";
    case ViolationKind::SlackMissing: return "SlackMissing";
    case ViolationKind::DuplicateNode: return "DuplicateNode";
    case ViolationKind::UnknownNode: return "UnknownNode";
    case ViolationKind::SelfLoop: return "SelfLoop";
    case ViolationKind::DuplicateLvGrid: return "DuplicateLvGrid";
    case ViolationKind::BadBase: return "BadBase";
    }
    return "Unknown";
}

bool ValidationReport::has(ViolationKind k) const
{
    return std::any_of(violations.begin(), violations.end(),
                       [k](const Violation& v) { return v.kind == k; });
}

ValidationReport validate_radial(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                                 const std::string& root)
{
    ValidationReport rep;
    auto add = [&](ViolationKind k, const std::string& el, const std::string& msg) {
        rep.violations.push_back({k, el, msg});
    };

    std::map<std::string, int> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (!index.emplace(n.id, static_cast<int>(i)).second)
            add(ViolationKind::DuplicateNode, n.id, "node id appears twice");
        if (!(n.vmin > 0.0) || !(n.vmin < n.vmax) || !std::isfinite(n.vmax))
            add(ViolationKind::BadVoltageLimits, n.id, "need 0 < vmin < vmax");
    }
    if (!index.count(root))
        add(ViolationKind::SlackMissing, root, "root/slack node not found");

    bool endpoints_ok = true;
    for (const Branch& b : branches) {
        const std::string name = b.name();
        if (!index.count(b.from) || !index.count(b.to)) {
            add(ViolationKind::UnknownNode, name, "branch endpoint not in node table");
            endpoints_ok = false;
        }
        if (b.from == b.to)
            add(ViolationKind::SelfLoop, name, "branch connects a node to itself");
        if (!std::isfinite(b.r) || !std::isfinite(b.x))
            add(ViolationKind::NonFiniteImpedance, name, "impedance must be finite");
        else if (b.r < 0.0)
            add(ViolationKind::NegativeResistance, name, "r must be >= 0");
        if (!(b.imax > 0.0))
            add(ViolationKind::NonPositiveAmpacity, name, "imax must be > 0");
    }

    if (branches.size() + 1 != nodes.size())
        add(ViolationKind::RadialityViolated, "network",
            std::to_string(branches.size()) + " branches for " + std::to_string(nodes.size()) +
                " nodes");

    if (endpoints_ok && index.count(root)) {
        // union-find for cycles and connectivity
        std::vector<int> parent(nodes.size());
        for (std::size_t i = 0; i < parent.size(); ++i)
            parent[i] = static_cast<int>(i);
        auto find = [&](int a) {
            while (parent[a] != a)
                a = parent[a] = parent[parent[a]];
            return a;
        };
        bool cycle = false;
        for (const Branch& b : branches) {
            const int a = find(index[b.from]), c = find(index[b.to]);
            if (a == c)
                cycle = true;
            else
                parent[a] = c;
        }
        if (cycle && !rep.has(ViolationKind::RadialityViolated))
            add(ViolationKind::RadialityViolated, "network", "branches form a cycle");
        const int r = find(index[root]);
        for (const Node& n : nodes)
            if (find(index[n.id]) != r)
                add(ViolationKind::Disconnected, n.id, "not connected to " + root);
    }
    return rep;
}

ValidationReport validate_network(const MvNetwork& net)
{
    ValidationReport rep = validate_radial(net.nodes, net.branches, net.slack);
    if (!(net.base_kva > 0.0) || !(net.base_v > 0.0))
        rep.violations.push_back({ViolationKind::BadBase, "base", "base power and voltage must be > 0"});
    std::set<std::string> grids;
    for (const TransformerLink& l : net.links) {
        if (net.node_index(l.mv_node) < 0)
            rep.violations.push_back(
                {ViolationKind::UnknownNode, l.mv_node, "transformer link to unknown MV node"});
        if (!grids.insert(l.lv_grid).second)
            rep.violations.push_back(
                {ViolationKind::DuplicateLvGrid, l.lv_grid, "LV grid linked more than once"});
    }
    return rep;
}

RadialTopology build_topology(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                              const std::string& root)
{
    const ValidationReport rep = validate_radial(nodes, branches, root);
    if (!rep.ok())
        throw Error(ErrorCode::InvalidArgument,
                    "invalid radial grid: " + to_string(rep.violations.front().kind) + " at " +
                        rep.violations.front().element);
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        index[nodes[i].id] = static_cast<int>(i);

    const std::size_t n = nodes.size();
    std::vector<std::vector<int>> incident(n);
    for (std::size_t b = 0; b < branches.size(); ++b) {
        incident[index[branches[b].from]].push_back(static_cast<int>(b));
        incident[index[branches[b].to]].push_back(static_cast<int>(b));
    }

    RadialTopology t;
    t.root = index[root];
    t.parent_branch.assign(n, -1);
    t.upstream.assign(branches.size(), -1);
    t.downstream.assign(branches.size(), -1);
    t.children.assign(n, {});
    std::deque<int> queue{t.root};
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        t.order.push_back(i);
        for (int b : incident[i]) {
            if (b == t.parent_branch[i])
                continue;
            const int f = index[branches[b].from], to = index[branches[b].to];
            const int j = f == i ? to : f;
            t.parent_branch[j] = b;
            t.upstream[b] = i;
            t.downstream[b] = j;
            t.children[i].push_back(b);
            queue.push_back(j);
        }
    }
    return t;
}

double MvState::losses(const std::vector<Branch>& branches) const
{
    double acc = 0.0;
    for (std::size_t b = 0; b < branches.size(); ++b)
        acc += branches[b].r * l[b];
    return acc;
}

MvState radial_power_flow(const std::vector<Node>& nodes, const std::vector<Branch>& branches,
                          const RadialTopology& topo, const std::vector<double>& p_inj,
                          const std::vector<double>& q_inj, double root_v, const SweepOptions& opt)
{
    if (!(root_v > 0.0))
        throw Error(ErrorCode::InvalidArgument, "root voltage must be positive");
    const std::size_t n = nodes.size(), m = branches.size();
    if (p_inj.size() != n || q_inj.size() != n)
        throw Error(ErrorCode::InvalidArgument, "injection vector size mismatch");

    MvState s;
    s.v.assign(n, root_v);
    s.l.assign(m, 0.0);
    s.P.assign(m, 0.0);
    s.Q.assign(m, 0.0);

    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        double change = 0.0;
        for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
            const int j = *it;
            const int b = topo.parent_branch[j];
            if (b < 0)
                continue;
            double P = -p_inj[j], Q = -q_inj[j];
            for (int c : topo.children[j]) {
                P += s.P[c];
                Q += s.Q[c];
            }
            P += branches[b].r * s.l[b];
            Q += branches[b].x * s.l[b];
            const double l = (P * P + Q * Q) / s.v[topo.upstream[b]];
            change = std::max({change, std::abs(P - s.P[b]), std::abs(Q - s.Q[b]), std::abs(l - s.l[b])});
            s.P[b] = P;
            s.Q[b] = Q;
            s.l[b] = l;
        }
        for (int j : topo.order) {
            const int b = topo.parent_branch[j];
            if (b < 0)
                continue;
            const Branch& br = branches[b];
            const double vj = s.v[topo.upstream[b]] - 2.0 * (br.r * s.P[b] + br.x * s.Q[b]) +
                              (br.r * br.r + br.x * br.x) * s.l[b];
            if (!(vj > 0.0) || !std::isfinite(vj))
                throw Error(ErrorCode::NonConvergence,
                            "voltage collapse at node " + nodes[j].id + " after " +
                                std::to_string(sweep) + " sweeps");
            change = std::max(change, std::abs(vj - s.v[j]));
            s.v[j] = vj;
        }
        s.sweeps = sweep;
        if (change <= opt.tolerance) {
            double P = -p_inj[topo.root], Q = -q_inj[topo.root];
            for (int c : topo.children[topo.root]) {
                P += s.P[c];
                Q += s.Q[c];
            }
            s.p_slack = P;
            s.q_slack = Q;
            return s;
        }
    }
    throw Error(ErrorCode::NonConvergence,
                "sweep did not converge within " + std::to_string(opt.max_sweeps) + " sweeps");
}

namespace {

void net_injections(const MvNetwork& net, const std::vector<NodeInjection>& inj,
                    const std::vector<LinkFlow>& lv, std::vector<double>& p, std::vector<double>& q)
{
    p.assign(net.nodes.size(), 0.0);
    q.assign(net.nodes.size(), 0.0);
    for (const NodeInjection& ni : inj) {
        const int i = net.node_index(ni.node);
        if (i < 0)
            throw Error(ErrorCode::UnknownNode, "injection at unknown node " + ni.node);
        p[i] += ni.pg - ni.pc;
        q[i] += ni.qg - ni.qc;
    }
    if (!lv.empty() && lv.size() != net.links.size())
        throw Error(ErrorCode::InvalidArgument, "one transformer flow per link expected");
    for (std::size_t k = 0; k < lv.size(); ++k) {
        const int i = net.node_index(net.links[k].mv_node);
        p[i] -= lv[k].p;
        q[i] -= lv[k].q;
    }
}

} // namespace

MvState solve_distflow_fixed_point(const MvNetwork& net, const std::vector<NodeInjection>& inj,
                                   double slack_v, const std::vector<LinkFlow>& lv,
                                   const SweepOptions& opt)
{
    const RadialTopology topo = build_topology(net.nodes, net.branches, net.slack);
    std::vector<double> p, q;
    net_injections(net, inj, lv, p, q);
    MvState s = radial_power_flow(net.nodes, net.branches, topo, p, q, slack_v, opt);
    s.p_lv.assign(net.links.size(), 0.0);
    s.q_lv.assign(net.links.size(), 0.0);
    for (std::size_t k = 0; k < lv.size(); ++k) {
        s.p_lv[k] = lv[k].p;
        s.q_lv[k] = lv[k].q;
    }
    return s;
}

double distflow_residual(const MvNetwork& net, const std::vector<NodeInjection>& inj,
                         const std::vector<LinkFlow>& lv, const MvState& s)
{
    const RadialTopology topo = build_topology(net.nodes, net.branches, net.slack);
    std::vector<double> p, q;
    net_injections(net, inj, lv, p, q);
    double worst = 0.0;
    for (std::size_t j = 0; j < net.nodes.size(); ++j) {
        double bp = -p[j], bq = -q[j];
        for (int c : topo.children[j]) {
            bp += s.P[c];
            bq += s.Q[c];
        }
        const int b = topo.parent_branch[j];
        if (b >= 0) {
            bp -= s.P[b] - net.branches[b].r * s.l[b];
            bq -= s.Q[b] - net.branches[b].x * s.l[b];
        } else {
            bp -= s.p_slack;
            bq -= s.q_slack;
        }
        worst = std::max({worst, std::abs(bp), std::abs(bq)});
    }
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        const Branch& br = net.branches[b];
        const int i = topo.upstream[b], j = topo.downstream[b];
        const double drop = s.v[i] - 2.0 * (br.r * s.P[b] + br.x * s.Q[b]) +
                            (br.r * br.r + br.x * br.x) * s.l[b] - s.v[j];
        const double cone = s.v[i] * s.l[b] - s.P[b] * s.P[b] - s.Q[b] * s.Q[b];
        worst = std::max({worst, std::abs(drop), std::abs(cone)});
    }
    return worst;
}

PhysicalNetwork to_physical(const MvNetwork& net)
{
    const double zbase = net.base_v * net.base_v / (net.base_kva * 1e3);
    const double ibase = net.base_kva * 1e3 / (std::sqrt(3.0) * net.base_v);
    PhysicalNetwork p{net.nodes, {}, net.slack, net.links, net.base_kva, net.base_v};
    for (const Branch& b : net.branches)
        p.branches.push_back({b.from, b.to, b.r * zbase, b.x * zbase, b.imax * ibase});
    return p;
}

MvNetwork from_physical(const PhysicalNetwork& phys)
{
    const double zbase = phys.base_v * phys.base_v / (phys.base_kva * 1e3);
    const double ibase = phys.base_kva * 1e3 / (std::sqrt(3.0) * phys.base_v);
    MvNetwork net;
    net.nodes = phys.nodes;
    net.slack = phys.slack;
    net.links = phys.links;
    net.base_kva = phys.base_kva;
    net.base_v = phys.base_v;
    for (const PhysicalBranch& b : phys.branches)
        net.branches.push_back({b.from, b.to, b.r_ohm / zbase, b.x_ohm / zbase, b.imax_a / ibase});
    return net;
}

} // namespace gridflex
