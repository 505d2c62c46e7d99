#include "gridflex/opf.hpp"

#include "formulation.hpp"
#include "gridflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridflex {

namespace {

detail::BuildOptions schedule_options(const OpfScenario& sc, int t0, int t1)
{
    detail::BuildOptions o;
    o.t_begin = t0;
    o.t_end = t1;
    o.security = detail::Security::Priced;
    o.slack_v_lo = sc.options.slack_v_min * sc.options.slack_v_min;
    o.slack_v_hi = sc.options.slack_v_max * sc.options.slack_v_max;
    o.weights = sc.weights;
    return o;
}

conic::SolverSettings solver_settings(const OpfScenario& sc)
{
    conic::SolverSettings s;
    s.tol = {sc.options.feas_tol, sc.options.gap_tol};
    s.max_iterations = 200;
    return s;
}

StepResult decode_step(const OpfScenario& sc, const detail::Formulation& f, const detail::StepVars& s,
                       const std::vector<double>& x)
{
    const MvNetwork& mv = sc.mv;
    const double base = sc.base();
    const int t = s.t;
    StepResult r;
    auto val = [&](conic::Var v) { return x[static_cast<std::size_t>(v.index)]; };

    for (conic::Var v : s.v)
        r.mv.v.push_back(val(v));
    for (std::size_t b = 0; b < mv.branches.size(); ++b) {
        r.mv.P.push_back(val(s.P[b]));
        r.mv.Q.push_back(val(s.Q[b]));
        r.mv.l.push_back(val(s.l[b]));
    }
    r.slack_v = r.mv.v[f.topo.root];
    r.mv.p_slack = val(s.p_slk);
    r.mv.q_slack = val(s.q_slk);
    for (std::size_t g = 0; g < sc.lv.size(); ++g) {
        const LvOperatingPoint& op = sc.lv_models[g].ops[t];
        LvState st;
        st.dp_sl = detail::value(s.dp_sl[g], x);
        st.dq_sl = detail::value(s.dq_sl[g], x);
        for (const auto& e : s.V[g])
            st.V.push_back(detail::value(e, x));
        for (const auto& e : s.I[g])
            st.I.push_back(detail::value(e, x));
        r.mv.p_lv.push_back(op.p_sl0 + st.dp_sl);
        r.mv.q_lv.push_back(op.q_sl0 + st.dq_sl);
        r.lv.push_back(std::move(st));
    }
    for (std::size_t k = 0; k < sc.resources.size(); ++k) {
        r.delta.push_back({detail::value(s.dp[k], x) * base, detail::value(s.dq[k], x) * base});
        r.soc.push_back(s.soc[k] ? val(*s.soc[k]) : std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t i = 0; i < mv.nodes.size(); ++i) {
        const double hi = mv.nodes[i].vmax * mv.nodes[i].vmax, lo = mv.nodes[i].vmin * mv.nodes[i].vmin;
        r.v_dev.push_back(std::max({0.0, r.mv.v[i] - hi, lo - r.mv.v[i]}));
    }
    for (std::size_t b = 0; b < mv.branches.size(); ++b) {
        const double cap = mv.branches[b].imax * mv.branches[b].imax;
        r.l_dev.push_back(std::max(0.0, r.mv.l[b] - cap));
        const double gap = r.mv.v[f.topo.upstream[b]] * r.mv.l[b] - r.mv.P[b] * r.mv.P[b] - r.mv.Q[b] * r.mv.Q[b];
        r.relaxation_gap = std::max(r.relaxation_gap, gap);
    }
    if (!sc.ts.tso_schedule.empty()) {
        r.p_dev = std::abs(r.mv.p_slack - sc.ts.tso_schedule[t].p / base);
        r.q_dev = std::abs(r.mv.q_slack - sc.ts.tso_schedule[t].q / base);
    }
    return r;
}

void accumulate(const OpfScenario& sc, const StepResult& r, ObjectiveTerms& raw)
{
    raw.losses += r.mv.losses(sc.mv.branches);
    for (double d : r.v_dev)
        raw.voltage += d;
    for (double d : r.l_dev)
        raw.flow += d;
    raw.p_dev += r.p_dev;
    raw.q_dev += r.q_dev;
    for (const PQ& d : r.delta)
        raw.activation += (std::abs(d.p) + std::abs(d.q)) / sc.base();
}

} // namespace

Setpoints ScheduleResult::setpoints() const
{
    Setpoints sp;
    for (const StepResult& s : steps) {
        sp.delta.push_back(s.delta);
        sp.slack_v.push_back(s.slack_v);
    }
    return sp;
}

conic::ConicProgram build_combined_program(const OpfScenario& sc)
{
    return detail::build_formulation(sc, schedule_options(sc, 0, sc.ts.horizon)).prog;
}

ScheduleResult solve_schedule(const OpfScenario& sc)
{
    detail::require_models(sc);
    const int T = sc.ts.horizon;
    const int W = sc.options.window > 0 ? std::min(sc.options.window, T) : T;
    ScheduleResult res;
    res.windows = 0;
    std::vector<double> soc_start;
    for (int t0 = 0; t0 < T; t0 += W) {
        detail::BuildOptions opt = schedule_options(sc, t0, std::min(T, t0 + W));
        opt.soc_start = soc_start;
        const detail::Formulation f = detail::build_formulation(sc, opt);
        const conic::Solution sol = detail::solve_relaxing(f.prog, solver_settings(sc));
        if (sol.status != conic::Status::Optimal)
            throw Error(ErrorCode::SolveFailed, "schedule window starting at step " + std::to_string(t0) + ": " +
                                                    conic::to_string(sol.status) +
                                                    (sol.diagnostics.empty() ? "" : " (" + sol.diagnostics + ")"));
        res.solver_objective += sol.objective;
        res.iterations += sol.iterations;
        res.solve_time_s += sol.wall_time_s;
        ++res.windows;
        for (const detail::StepVars& s : f.steps) {
            StepResult r = decode_step(sc, f, s, sol.x);
            accumulate(sc, r, res.raw);
            res.max_relaxation_gap = std::max(res.max_relaxation_gap, r.relaxation_gap);
            res.steps.push_back(std::move(r));
        }
        soc_start.assign(sc.resources.size(), 0.0);
        for (std::size_t k = 0; k < sc.resources.size(); ++k)
            if (sc.resources[k].is_storage())
                soc_start[k] = res.steps.back().soc[k];
    }

    const ObjectiveWeights& w = sc.weights;
    res.weighted.losses = w.w_l * res.raw.losses;
    res.weighted.voltage = w.w_v * res.raw.voltage;
    res.weighted.flow = w.w_lim * res.raw.flow;
    res.weighted.p_dev = sc.ts.tso_schedule.empty() ? 0.0 : w.w_p * res.raw.p_dev;
    res.weighted.q_dev = sc.ts.tso_schedule.empty() ? 0.0 : w.w_q * res.raw.q_dev;
    res.weighted.activation = w.w_act * res.raw.activation;
    res.objective = res.weighted.total();
    res.relaxation_loose = res.max_relaxation_gap > sc.options.relaxation_threshold;
    return res;
}

ObjectiveTerms objective_breakdown(const ScheduleResult& res) { return res.weighted; }

namespace {

void check_limits(const OpfScenario& sc, int t, const CoupledState& cs, double tol,
                  std::vector<OracleViolation>& out)
{
    auto check = [&](const std::string& el, double value, double lo, double hi, const char* hi_name) {
        if (value > hi + tol)
            out.push_back({t, el, hi_name, value, hi, value - hi});
        if (lo > 0.0 && value < lo - tol)
            out.push_back({t, el, "vmin", value, lo, lo - value});
    };
    const MvNetwork& mv = sc.mv;
    for (std::size_t i = 0; i < mv.nodes.size(); ++i)
        check("mv:" + mv.nodes[i].id, std::sqrt(cs.mv.v[i]), mv.nodes[i].vmin, mv.nodes[i].vmax, "vmax");
    for (std::size_t b = 0; b < mv.branches.size(); ++b)
        check("mv:" + mv.branches[b].name(), std::sqrt(std::max(cs.mv.l[b], 0.0)), 0.0, mv.branches[b].imax, "imax");
    for (std::size_t g = 0; g < sc.lv.size(); ++g) {
        const LvNetwork& lv = sc.lv[g];
        for (std::size_t i = 0; i < lv.nodes.size(); ++i)
            check(lv.id + ":" + lv.nodes[i].id, cs.lv[g].V[i], lv.nodes[i].vmin, lv.nodes[i].vmax, "vmax");
        for (std::size_t b = 0; b < lv.branches.size(); ++b)
            check(lv.id + ":" + lv.branches[b].name(), cs.lv[g].I[b], 0.0, lv.branches[b].imax, "imax");
    }
}

} // namespace

VerificationReport verify_against_oracle(const ScheduleResult& res, const OpfScenario& sc, double tolerance)
{
    if (static_cast<int>(res.steps.size()) != sc.ts.horizon)
        throw Error(ErrorCode::InvalidArgument, "result does not cover the scenario horizon");
    VerificationReport rep;
    rep.tolerance = tolerance;
    for (int t = 0; t < sc.ts.horizon; ++t) {
        const StepResult& r = res.steps[t];
        const double slack_v = r.slack_v;
        std::vector<LinkFlow> flows;
        for (std::size_t g = 0; g < r.mv.p_lv.size(); ++g)
            flows.push_back({r.mv.p_lv[g], r.mv.q_lv[g]});
        MvState mv_only;
        CoupledState cs;
        try {
            mv_only = solve_distflow_fixed_point(sc.mv, mv_injections(sc, t), slack_v, flows);
            cs = simulate_step(sc, t, slack_v, &r.delta);
        } catch (const Error& e) {
            throw Error(ErrorCode::OracleFailure, "step " + std::to_string(t) + ": " + e.what());
        }
        for (std::size_t i = 0; i < sc.mv.nodes.size(); ++i) {
            const double V = std::sqrt(r.mv.v[i]);
            rep.mv_voltage_error = std::max(rep.mv_voltage_error, std::abs(V - std::sqrt(mv_only.v[i])));
            rep.coupled_voltage_error = std::max(rep.coupled_voltage_error, std::abs(V - std::sqrt(cs.mv.v[i])));
        }
        rep.mv_loss_error = std::max(rep.mv_loss_error,
                                     std::abs(r.mv.losses(sc.mv.branches) - mv_only.losses(sc.mv.branches)));
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            for (std::size_t i = 0; i < cs.lv[g].V.size(); ++i)
                rep.lv_voltage_error = std::max(rep.lv_voltage_error, std::abs(r.lv[g].V[i] - cs.lv[g].V[i]));
            for (std::size_t b = 0; b < cs.lv[g].I.size(); ++b)
                rep.lv_current_error = std::max(rep.lv_current_error, std::abs(r.lv[g].I[b] - cs.lv[g].I[b]));
        }
        check_limits(sc, t, cs, tolerance, rep.violations);
    }
    return rep;
}

VerificationReport verify_setpoints(const OpfScenario& sc, const Setpoints& sp, double tolerance)
{
    if (static_cast<int>(sp.delta.size()) != sc.ts.horizon || sp.slack_v.size() != sp.delta.size())
        throw Error(ErrorCode::InvalidArgument, "setpoints do not cover the scenario horizon");
    VerificationReport rep;
    rep.tolerance = tolerance;
    for (int t = 0; t < sc.ts.horizon; ++t) {
        if (sp.delta[t].size() != sc.resources.size())
            throw Error(ErrorCode::InvalidArgument, "setpoints at step " + std::to_string(t) + " do not match the resources");
        CoupledState cs;
        try {
            cs = simulate_step(sc, t, sp.slack_v[t], &sp.delta[t]);
        } catch (const Error& e) {
            throw Error(ErrorCode::OracleFailure, "step " + std::to_string(t) + ": " + e.what());
        }
        check_limits(sc, t, cs, tolerance, rep.violations);
    }
    return rep;
}

} // namespace gridflex
