#pragma once

// Small hand-built scenarios shared by the unit and acceptance tests.

#include "gridflex/scenario.hpp"

#include <cmath>

namespace fixtures {

using namespace gridflex;

inline Resource pv(const std::string& id, const std::string& grid, const std::string& node, double lo, double qlim)
{
    Resource r;
    r.id = id;
    r.lv_grid = grid;
    r.lv_node = node;
    r.kind = ResourceKind::PV;
    r.dp_lo_kw = lo;
    r.dp_hi_kw = 0.0;
    r.dq_lo_kvar = -qlim;
    r.dq_hi_kvar = qlim;
    r.s_kva = 22.0;
    r.ramp_kw_per_hr = 120.0;
    return r;
}

inline Resource ev(const std::string& id, const std::string& grid, const std::string& node)
{
    Resource r;
    r.id = id;
    r.lv_grid = grid;
    r.lv_node = node;
    r.kind = ResourceKind::EvStorage;
    r.dp_lo_kw = -8.0;
    r.dp_hi_kw = 8.0;
    r.s_kva = 11.0;
    r.ramp_kw_per_hr = 48.0;
    r.eta = 0.95;
    r.cap_kwh = 40.0;
    r.soc0 = 0.5;
    return r;
}

// MV pss - m1 - m2, LV grid lv1 (t - h1 - h2) below m1, PV at h2, EV at h1.
inline OpfScenario small_case(int T = 1, bool with_ev = true)
{
    OpfScenario sc;
    sc.name = "small";
    sc.mv.nodes = {{"pss", 0.9, 1.1}, {"m1", 0.9, 1.1}, {"m2", 0.9, 1.1}};
    sc.mv.branches = {{"pss", "m1", 0.01, 0.02, 1.0}, {"m1", "m2", 0.01, 0.02, 1.0}};
    sc.mv.slack = "pss";
    sc.mv.links = {{"m1", "lv1"}};

    LvNetwork lv;
    lv.id = "lv1";
    lv.root = "t";
    lv.nodes = {{"t", 0.9, 1.1}, {"h1", 0.9, 1.1}, {"h2", 0.9, 1.1}};
    lv.branches = {{"t", "h1", 0.4, 0.12, 0.12}, {"h1", "h2", 0.4, 0.12, 0.08}};
    sc.lv = {lv};

    sc.resources = {pv("pv1", "lv1", "h2", -3.0, 6.0)};
    if (with_ev)
        sc.resources.push_back(ev("ev1", "lv1", "h1"));

    sc.ts.horizon = T;
    for (int t = 0; t < T; ++t) {
        const double f = 1.0 + 0.1 * std::sin(0.7 * t);
        sc.ts.mv.push_back({{0.0, 0.0}, {-150.0 * f, -40.0 * f}, {-300.0 * f, -80.0 * f}});
        sc.ts.lv.push_back({{{0.0, 0.0}, {-4.0 * f, -1.0 * f}, {-3.0 * f, -0.8 * f}}});
        std::vector<PQ> base{{14.0 * f, 0.0}};
        if (with_ev)
            base.push_back({-4.0, 0.0});
        sc.ts.resource.push_back(base);
    }
    prepare_lv_models(sc);
    return sc;
}

// A single step with no load: every voltage sits at the slack value.
inline OpfScenario flat_case(double node_vmax)
{
    OpfScenario sc;
    sc.name = "flat";
    sc.mv.nodes = {{"pss", 0.9, 1.1}, {"m1", 0.9, node_vmax}};
    sc.mv.branches = {{"pss", "m1", 0.01, 0.01, 1.0}};
    sc.mv.slack = "pss";
    sc.ts.horizon = 1;
    sc.ts.mv = {{{0.0, 0.0}, {0.0, 0.0}}};
    sc.ts.lv = {{}};
    sc.ts.resource = {{}};
    sc.options.slack_v_min = 1.0;
    sc.options.slack_v_max = 1.0;
    prepare_lv_models(sc);
    return sc;
}

// Lossless MV line, LV feeder t - h1 with one PV able to curtail 10 kW.
inline OpfScenario lossless_pv_case()
{
    OpfScenario sc;
    sc.name = "lossless";
    sc.mv.nodes = {{"pss", 0.9, 1.1}, {"m1", 0.9, 1.1}};
    sc.mv.branches = {{"pss", "m1", 0.0, 0.0, 1.0}};
    sc.mv.slack = "pss";
    sc.mv.links = {{"m1", "lv1"}};
    LvNetwork lv;
    lv.id = "lv1";
    lv.root = "t";
    lv.nodes = {{"t", 0.9, 1.1}, {"h1", 0.9, 1.1}};
    lv.branches = {{"t", "h1", 0.4, 0.12, 0.2}};
    sc.lv = {lv};
    Resource r = pv("pv1", "lv1", "h1", -10.0, 0.0);
    r.dq_lo_kvar = r.dq_hi_kvar = 0.0;
    sc.resources = {r};
    sc.ts.horizon = 1;
    sc.ts.mv = {{{0.0, 0.0}, {-100.0, -20.0}}};
    sc.ts.lv = {{{{0.0, 0.0}, {-2.0, -0.5}}}};
    sc.ts.resource = {{{18.0, 0.0}}};
    sc.options.slack_v_min = 1.0;
    sc.options.slack_v_max = 1.0;
    prepare_lv_models(sc);
    return sc;
}

} // namespace fixtures
