#include "gridflex/scenario.hpp"

#include "gridflex/error.hpp"

#include <cmath>
#include <set>

namespace gridflex {

std::string to_string(ResourceKind k)
{
    switch (k) {
    case ResourceKind::PV: return "PV";
    case ResourceKind::EvStorage: return "EV_STORAGE";
    case ResourceKind::Load: return "LOAD";
    }
    return "?";
}

ResourceKind parse_resource_kind(const std::string& s)
{
    if (s == "PV")
        return ResourceKind::PV;
    if (s == "EV_STORAGE" || s == "EV" || s == "STORAGE")
        return ResourceKind::EvStorage;
    if (s == "LOAD")
        return ResourceKind::Load;
    throw Error(ErrorCode::ParseError, "unknown resource kind '" + s + "'");
}

int OpfScenario::lv_index(const std::string& grid) const
{
    for (std::size_t g = 0; g < lv.size(); ++g)
        if (lv[g].id == grid)
            return static_cast<int>(g);
    return -1;
}

int OpfScenario::resource_index(const std::string& id) const
{
    for (std::size_t k = 0; k < resources.size(); ++k)
        if (resources[k].id == id)
            return static_cast<int>(k);
    return -1;
}

Box OpfScenario::box(int t, int k) const
{
    if (!step_boxes.empty())
        return step_boxes[t][k];
    const Resource& r = resources[k];
    return {r.dp_lo_kw, r.dp_hi_kw, r.dq_lo_kvar, r.dq_hi_kvar};
}

std::vector<ScenarioDefect> check_scenario(const OpfScenario& sc)
{
    std::vector<ScenarioDefect> out;
    auto add = [&](const std::string& el, const std::string& msg) { out.push_back({el, msg}); };

    for (const Violation& v : validate_network(sc.mv).violations)
        add(v.element, to_string(v.kind) + ": " + v.message);
    if (sc.lv.size() != sc.mv.links.size())
        add("links", "one LV network per transformer link expected");
    for (std::size_t g = 0; g < sc.lv.size() && g < sc.mv.links.size(); ++g) {
        if (sc.lv[g].id != sc.mv.links[g].lv_grid)
            add(sc.lv[g].id, "LV grid order does not follow the transformer links");
        for (const Violation& v : validate_lv(sc.lv[g]).violations)
            add(sc.lv[g].id + ":" + v.element, to_string(v.kind) + ": " + v.message);
    }

    std::set<std::string> ids;
    for (const Resource& r : sc.resources) {
        if (!ids.insert(r.id).second)
            add(r.id, "duplicate resource id");
        const int g = sc.lv_index(r.lv_grid);
        if (g < 0)
            add(r.id, "unknown LV grid " + r.lv_grid);
        else if (sc.lv[g].node_index(r.lv_node) < 0)
            add(r.id, "unknown LV node " + r.lv_node);
        else if (r.lv_node == sc.lv[g].root)
            add(r.id, "resources cannot sit on the transformer secondary");
        if (!(r.dp_lo_kw <= r.dp_hi_kw) || !(r.dq_lo_kvar <= r.dq_hi_kvar))
            add(r.id, "flexibility box bounds out of order");
        if (!(r.s_kva > 0.0))
            add(r.id, "s_kva must be > 0");
        if (!(r.pf_lim > 0.0 && r.pf_lim <= 1.0))
            add(r.id, "pf_lim must be in (0, 1]");
        if (!(r.ramp_kw_per_hr >= 0.0))
            add(r.id, "ramp must be >= 0");
        if (r.is_storage()) {
            if (!(r.eta > 0.0 && r.eta <= 1.0))
                add(r.id, "eta must be in (0, 1]");
            if (!(r.cap_kwh > 0.0))
                add(r.id, "storage capacity must be > 0");
            if (!(r.soc_min < r.soc_max) || r.soc_min < 0.0 || r.soc_max > 1.0)
                add(r.id, "need 0 <= soc_min < soc_max <= 1");
            if (r.soc0 < r.soc_min || r.soc0 > r.soc_max)
                add(r.id, "initial SOC outside its limits");
        }
    }

    const TimeSeries& ts = sc.ts;
    const auto T = static_cast<std::size_t>(std::max(ts.horizon, 0));
    if (ts.horizon < 1)
        add("timeseries", "horizon must be >= 1");
    if (!(ts.dt_min > 0.0))
        add("timeseries", "step length must be > 0");
    if (ts.mv.size() != T || ts.lv.size() != T || ts.resource.size() != T)
        add("timeseries", "per-step tables must cover the horizon");
    for (std::size_t t = 0; t < T && t < ts.mv.size(); ++t)
        if (ts.mv[t].size() != sc.mv.nodes.size())
            add("timeseries", "MV injections at step " + std::to_string(t) + " do not match the node count");
    for (std::size_t t = 0; t < T && t < ts.lv.size(); ++t) {
        if (ts.lv[t].size() != sc.lv.size()) {
            add("timeseries", "LV injections at step " + std::to_string(t) + " do not match the grid count");
            continue;
        }
        for (std::size_t g = 0; g < sc.lv.size(); ++g)
            if (ts.lv[t][g].size() != sc.lv[g].nodes.size())
                add("timeseries", "LV injections for " + sc.lv[g].id + " at step " + std::to_string(t));
    }
    for (std::size_t t = 0; t < T && t < ts.resource.size(); ++t)
        if (ts.resource[t].size() != sc.resources.size())
            add("timeseries", "resource baselines at step " + std::to_string(t));
    if (!ts.tso_schedule.empty() && ts.tso_schedule.size() != T)
        add("tso_schedule", "schedule must be empty or cover the horizon");
    if (!sc.step_boxes.empty()) {
        if (sc.step_boxes.size() != T)
            add("step_boxes", "per-step boxes must cover the horizon");
        for (const auto& row : sc.step_boxes) {
            if (row.size() != sc.resources.size()) {
                add("step_boxes", "one box per resource expected");
                break;
            }
            for (const Box& b : row)
                if (!(b.p_lo <= b.p_hi + 1e-12) || !(b.q_lo <= b.q_hi + 1e-12))
                    add("step_boxes", "box bounds out of order");
        }
    }
    const ScenarioOptions& o = sc.options;
    if (!(o.slack_v_min > 0.0 && o.slack_v_min <= o.slack_v_max))
        add("options", "slack voltage bounds out of order");
    if (!(o.r_thresh > 0.0))
        add("options", "ramp threshold must be > 0");
    const ObjectiveWeights& w = sc.weights;
    if (w.w_l < 0 || w.w_v < 0 || w.w_lim < 0 || w.w_p < 0 || w.w_q < 0 || w.w_act < 0)
        add("weights", "weights must be nonnegative");
    return out;
}

Setpoints Setpoints::zero(const OpfScenario& sc)
{
    Setpoints s;
    s.delta.assign(static_cast<std::size_t>(sc.ts.horizon), std::vector<PQ>(sc.resources.size()));
    const double v = sc.options.slack_v_nominal;
    s.slack_v.assign(static_cast<std::size_t>(sc.ts.horizon), v * v);
    return s;
}

LvInjection lv_injection(const OpfScenario& sc, int t, int grid, const std::vector<PQ>* delta)
{
    const LvNetwork& lv = sc.lv[grid];
    const double base = sc.base();
    LvInjection inj{std::vector<double>(lv.nodes.size(), 0.0), std::vector<double>(lv.nodes.size(), 0.0)};
    for (std::size_t i = 0; i < lv.nodes.size(); ++i) {
        inj.p[i] = sc.ts.lv[t][grid][i].p / base;
        inj.q[i] = sc.ts.lv[t][grid][i].q / base;
    }
    for (std::size_t k = 0; k < sc.resources.size(); ++k) {
        const Resource& r = sc.resources[k];
        if (r.lv_grid != lv.id)
            continue;
        const int i = lv.node_index(r.lv_node);
        double p = sc.ts.resource[t][k].p, q = sc.ts.resource[t][k].q;
        if (delta) {
            p += (*delta)[k].p;
            q += (*delta)[k].q;
        }
        inj.p[i] += p / base;
        inj.q[i] += q / base;
    }
    return inj;
}

std::vector<NodeInjection> mv_injections(const OpfScenario& sc, int t)
{
    const double base = sc.base();
    std::vector<NodeInjection> inj;
    for (std::size_t i = 0; i < sc.mv.nodes.size(); ++i) {
        const PQ& pq = sc.ts.mv[t][i];
        inj.push_back({sc.mv.nodes[i].id, std::max(pq.p, 0.0) / base, std::max(-pq.p, 0.0) / base,
                       std::max(pq.q, 0.0) / base, std::max(-pq.q, 0.0) / base});
    }
    return inj;
}

CoupledState simulate_step(const OpfScenario& sc, int t, double slack_v, const std::vector<PQ>* delta)
{
    const std::vector<NodeInjection> inj = mv_injections(sc, t);
    std::vector<LvInjection> lv_inj;
    for (std::size_t g = 0; g < sc.lv.size(); ++g)
        lv_inj.push_back(lv_injection(sc, t, static_cast<int>(g), delta));

    CoupledState cs;
    std::vector<double> root(sc.lv.size(), std::sqrt(slack_v));
    for (int iter = 0; iter < 50; ++iter) {
        cs.lv.clear();
        std::vector<LinkFlow> flows;
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            cs.lv.push_back(lv_load_flow(sc.lv[g], lv_inj[g], root[g]));
            flows.push_back({cs.lv.back().p_sl, cs.lv.back().q_sl});
        }
        cs.mv = solve_distflow_fixed_point(sc.mv, inj, slack_v, flows);
        double change = 0.0;
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            const double r = std::sqrt(cs.mv.v[sc.mv.node_index(sc.mv.links[g].mv_node)]);
            change = std::max(change, std::abs(r - root[g]));
            root[g] = r;
        }
        if (change <= 1e-13)
            return cs;
    }
    throw Error(ErrorCode::OracleFailure,
                "MV/LV coupling did not settle at step " + std::to_string(t));
}

namespace {

void build_step_models(OpfScenario& sc, int t)
{
    const double v = sc.options.slack_v_nominal;
    const CoupledState cs = simulate_step(sc, t, v * v);
    ReferenceOptions ro;
    ro.transformer_terms = sc.options.transformer_terms;
    for (std::size_t g = 0; g < sc.lv.size(); ++g) {
        const double root = std::sqrt(cs.mv.v[sc.mv.node_index(sc.mv.links[g].mv_node)]);
        const LvInjection inj = lv_injection(sc, t, static_cast<int>(g));
        LvModelSet& set = sc.lv_models[g];
        set.ops[t] = lv_operating_point(sc.lv[g], inj, root, t);
        if (g < sc.fixed_coefficients.size() && sc.fixed_coefficients[g])
            set.models[t] = *sc.fixed_coefficients[g];
        else
            set.models[t] = coefficients_from_reference(sc.lv[g], inj, root, ro);
    }
}

} // namespace

void prepare_lv_models(OpfScenario& sc)
{
    const auto defects = check_scenario(sc);
    if (!defects.empty())
        throw Error(ErrorCode::InconsistentScenario, defects.front().element + ": " + defects.front().message +
                                                         (defects.size() > 1 ? " (+" + std::to_string(defects.size() - 1) + " more)" : ""));
    const auto T = static_cast<std::size_t>(sc.ts.horizon);
    sc.lv_models.assign(sc.lv.size(), LvModelSet{});
    for (LvModelSet& set : sc.lv_models) {
        set.models.resize(T);
        set.ops.resize(T);
    }
    for (int t = 0; t < sc.ts.horizon; ++t)
        build_step_models(sc, t);
}

int shift_baseline(OpfScenario& sc, const Setpoints& sp)
{
    const double base = sc.base();
    int recomputed = 0;
    for (int t = 0; t < sc.ts.horizon; ++t) {
        const std::vector<PQ>& d = sp.delta[t];
        bool any = false;
        for (std::size_t k = 0; k < sc.resources.size(); ++k) {
            sc.ts.resource[t][k].p += d[k].p;
            sc.ts.resource[t][k].q += d[k].q;
            any = any || d[k].p != 0.0 || d[k].q != 0.0;
        }
        if (!any || sc.lv_models.empty())
            continue;

        bool linear = true;
        std::vector<Eigen::VectorXd> dp(sc.lv.size()), dq(sc.lv.size());
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            const LvLayout& L = sc.lv_models[g].models[t].layout;
            dp[g] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.injectors.size()));
            dq[g] = dp[g];
            for (std::size_t k = 0; k < sc.resources.size(); ++k) {
                if (sc.resources[k].lv_grid != sc.lv[g].id)
                    continue;
                const int j = L.injector_index(sc.resources[k].lv_node);
                dp[g](j) += d[k].p / base;
                dq[g](j) += d[k].q / base;
            }
            linear = linear && within_trust_region(sc.lv[g], dp[g], sc.options.trust_fraction);
        }
        if (!linear) {
            build_step_models(sc, t);
            recomputed += static_cast<int>(sc.lv.size());
            continue;
        }
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            const SensitivityModel& m = sc.lv_models[g].models[t];
            LvOperatingPoint& op = sc.lv_models[g].ops[t];
            const LvState st = predict_state(m, op, dp[g], dq[g]);
            for (std::size_t i = 0; i < op.v0.size(); ++i) {
                op.drop[i] -= st.V[i] - op.v0[i];
                op.v0[i] = st.V[i];
            }
            op.i0 = st.I;
            op.p_sl0 += st.dp_sl;
            op.q_sl0 += st.dq_sl;
        }
    }
    return recomputed;
}

OpfScenario tiny_scenario()
{
    OpfScenario sc;
    sc.name = "tiny";
    sc.mv.nodes = {{"pss", 0.9, 1.1}, {"m1", 0.9, 1.1}};
    sc.mv.branches = {{"pss", "m1", 0.01, 0.02, 0.5}};
    sc.mv.slack = "pss";
    sc.mv.links = {{"m1", "lv1"}};
    sc.mv.base_kva = 1000.0;
    sc.mv.base_v = 20000.0;

    LvNetwork lv;
    lv.id = "lv1";
    lv.root = "t";
    lv.nodes = {{"t", 0.9, 1.1}, {"h1", 0.9, 1.1}};
    lv.branches = {{"t", "h1", 0.05, 0.02, 0.1}};
    sc.lv = {lv};

    Resource pv;
    pv.id = "pv1";
    pv.lv_grid = "lv1";
    pv.lv_node = "h1";
    pv.kind = ResourceKind::PV;
    pv.dp_lo_kw = -2.0;
    pv.dp_hi_kw = 0.0;
    pv.dq_lo_kvar = -5.0;
    pv.dq_hi_kvar = 5.0;
    pv.s_kva = 25.0;
    pv.ramp_kw_per_hr = 120.0;
    sc.resources = {pv};

    sc.ts.dt_min = 10.0;
    sc.ts.horizon = 1;
    sc.ts.mv = {{{0.0, 0.0}, {-200.0, -50.0}}};
    sc.ts.lv = {{{{0.0, 0.0}, {-5.0, -1.0}}}};
    sc.ts.resource = {{{15.0, 0.0}}};
    prepare_lv_models(sc);
    return sc;
}

} // namespace gridflex
