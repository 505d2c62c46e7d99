#include "formulation.hpp"

#include "gridflex/error.hpp"

#include <cmath>
#include <limits>

namespace gridflex::detail {

using conic::AffineExpr;
using conic::ConeKind;
using conic::Sense;
using conic::Var;

void require_models(const OpfScenario& sc)
{
    const auto T = static_cast<std::size_t>(sc.ts.horizon);
    if (sc.lv_models.size() != sc.lv.size())
        throw Error(ErrorCode::InconsistentScenario, "LV models not prepared for every grid");
    for (std::size_t g = 0; g < sc.lv.size(); ++g) {
        const LvModelSet& m = sc.lv_models[g];
        if (m.models.size() != T || m.ops.size() != T)
            throw Error(ErrorCode::InconsistentScenario, "LV grid " + sc.lv[g].id + " lacks a model for some step");
        for (std::size_t t = 0; t < T; ++t)
            if (m.models[t].layout.nodes.size() != sc.lv[g].nodes.size() ||
                m.ops[t].v0.size() != sc.lv[g].nodes.size())
                throw Error(ErrorCode::InconsistentScenario,
                            "LV grid " + sc.lv[g].id + " model at step " + std::to_string(t) + " does not match the grid");
    }
}

double value(const AffineExpr& e, const std::vector<double>& x) { return e.evaluate(x); }

conic::Solution solve_relaxing(const conic::ConicProgram& prog, conic::SolverSettings settings)
{
    conic::Solution sol = conic::solve(prog, settings);
    for (int i = 0; i < 2 && sol.status == conic::Status::NumericalFailure; ++i) {
        settings.tol.feas *= 10.0;
        settings.tol.gap *= 10.0;
        sol = conic::solve(prog, settings);
    }
    return sol;
}

std::vector<Placement> place_resources(const OpfScenario& sc)
{
    std::vector<Placement> out;
    for (const Resource& r : sc.resources) {
        Placement p;
        p.grid = sc.lv_index(r.lv_grid);
        if (p.grid < 0)
            throw Error(ErrorCode::InconsistentScenario, r.id + ": unknown LV grid " + r.lv_grid);
        p.injector = LvLayout::of(sc.lv[p.grid]).injector_index(r.lv_node);
        if (p.injector < 0)
            throw Error(ErrorCode::InconsistentScenario, r.id + ": node " + r.lv_node + " cannot inject");
        out.push_back(p);
    }
    return out;
}

std::vector<std::vector<double>> baseline_soc(const OpfScenario& sc)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> out(static_cast<std::size_t>(sc.ts.horizon),
                                         std::vector<double>(sc.resources.size(), nan));
    for (std::size_t k = 0; k < sc.resources.size(); ++k) {
        const Resource& r = sc.resources[k];
        if (!r.is_storage())
            continue;
        double soc = r.soc0;
        for (int t = 0; t < sc.ts.horizon; ++t) {
            soc -= r.eta * sc.ts.dt_min / 60.0 / r.cap_kwh * sc.ts.resource[t][k].p;
            out[t][k] = soc;
        }
    }
    return out;
}

namespace {

// Bounds of a resource's change at step t, kW / kvar.
Box step_box(const OpfScenario& sc, const BuildOptions& opt, int t, int k)
{
    Box b = sc.box(t, k);
    const Resource& r = sc.resources[k];
    if (r.kind == ResourceKind::PV)
        b.p_lo = std::max(b.p_lo, -sc.ts.resource[t][k].p);  // cannot curtail below zero output
    if (opt.ramp && t == opt.t_begin) {
        const double cap = r.ramp_kw_per_hr * sc.ts.dt_min / 60.0;
        b.p_lo = std::max(b.p_lo, -cap);
        b.p_hi = std::min(b.p_hi, cap);
        b.q_lo = std::max(b.q_lo, -cap);
        b.q_hi = std::min(b.q_hi, cap);
    }
    return b;
}

AffineExpr flex_expr(conic::ConicProgram& prog, const std::string& name, double lo, double hi, double base)
{
    if (lo == 0.0 && hi == 0.0)
        return AffineExpr(0.0);
    if (lo == hi)
        return AffineExpr(lo / base);
    return AffineExpr(prog.add_variable(name, lo / base, hi / base));
}

} // namespace

Formulation build_formulation(const OpfScenario& sc, const BuildOptions& opt)
{
    require_models(sc);
    Formulation f;
    conic::ConicProgram& prog = f.prog;
    const MvNetwork& mv = sc.mv;
    f.topo = build_topology(mv.nodes, mv.branches, mv.slack);
    const RadialTopology& topo = f.topo;
    const double base = sc.base();
    const double dt_h = sc.ts.dt_min / 60.0;
    const auto nres = sc.resources.size();
    const std::vector<Placement> place = place_resources(sc);
    const bool priced = opt.security == Security::Priced;
    const ObjectiveWeights& w = opt.weights;

    std::vector<int> link_node;
    for (const TransformerLink& lk : mv.links)
        link_node.push_back(mv.node_index(lk.mv_node));

    for (int t = opt.t_begin; t < opt.t_end; ++t) {
        StepVars s;
        s.t = t;
        const std::string ts = "[" + std::to_string(t) + "]";

        // MV state
        for (std::size_t i = 0; i < mv.nodes.size(); ++i) {
            const Node& n = mv.nodes[i];
            double lo = -conic::kInf, hi = conic::kInf;
            if (static_cast<int>(i) == topo.root) {
                lo = opt.slack_v_lo;
                hi = opt.slack_v_hi;
            } else if (!priced) {
                lo = n.vmin * n.vmin;
                hi = n.vmax * n.vmax;
            }
            s.v.push_back(prog.add_variable("v" + ts + n.id, lo, hi));
        }
        for (const Branch& b : mv.branches) {
            s.P.push_back(prog.add_variable("P" + ts + b.name()));
            s.Q.push_back(prog.add_variable("Q" + ts + b.name()));
            s.l.push_back(prog.add_variable("l" + ts + b.name(), 0.0, priced ? conic::kInf : b.imax * b.imax));
        }
        s.p_slk = prog.add_variable("p_slk" + ts);
        s.q_slk = prog.add_variable("q_slk" + ts);

        // resource changes
        for (std::size_t k = 0; k < nres; ++k) {
            const Resource& r = sc.resources[k];
            const bool frozen = !opt.frozen.empty() && opt.frozen[k];
            const Box b = frozen ? Box{} : step_box(sc, opt, t, static_cast<int>(k));
            s.dp.push_back(flex_expr(prog, "dp" + ts + r.id, b.p_lo, b.p_hi, base));
            s.dq.push_back(flex_expr(prog, "dq" + ts + r.id, b.q_lo, b.q_hi, base));
        }
        if (opt.ramp && t > opt.t_begin) {
            const StepVars& prev = f.steps.back();
            for (std::size_t k = 0; k < nres; ++k) {
                const double cap = sc.resources[k].ramp_kw_per_hr * dt_h / base;
                const std::string tag = "ramp" + ts + sc.resources[k].id;
                for (int pq = 0; pq < 2; ++pq) {
                    const AffineExpr d = pq == 0 ? s.dp[k] - prev.dp[k] : s.dq[k] - prev.dq[k];
                    if (d.terms().empty())
                        continue;
                    prog.add_row(d, Sense::LessEqual, cap, tag);
                    prog.add_row(d, Sense::GreaterEqual, -cap, tag);
                }
            }
        }

        // LV grids
        s.V0.resize(sc.lv.size());
        s.V.resize(sc.lv.size());
        s.I.resize(sc.lv.size());
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            const LvNetwork& lv = sc.lv[g];
            const SensitivityModel& m = sc.lv_models[g].models[t];
            const LvOperatingPoint& op = sc.lv_models[g].ops[t];
            const Var vm = s.v[link_node[g]];
            AffineExpr dps(0.0), dqs(0.0);
            for (std::size_t k = 0; k < nres; ++k) {
                if (place[k].grid != static_cast<int>(g))
                    continue;
                const int j = place[k].injector;
                if (m.has_transformer_terms()) {
                    dps.add(s.dp[k], m.tpp(j)).add(s.dq[k], m.tpq(j));
                    dqs.add(s.dp[k], m.tqp(j)).add(s.dq[k], m.tqq(j));
                } else {
                    dps.add(s.dp[k], -1.0);
                    dqs.add(s.dq[k], -1.0);
                }
            }
            s.dp_sl.push_back(dps);
            s.dq_sl.push_back(dqs);

            for (std::size_t i = 0; i < lv.nodes.size(); ++i) {
                const std::string id = lv.id + ":" + lv.nodes[i].id;
                const Var v0 = prog.add_variable("V0" + ts + id);
                s.V0[g].push_back(v0);
                // V0 = 0.5 (v_mv + 1) - drop
                prog.add_row(AffineExpr(v0) - 0.5 * AffineExpr(vm), Sense::Equal, 0.5 - op.drop[i], "couple" + ts + id);
                AffineExpr V(v0);
                for (std::size_t k = 0; k < nres; ++k) {
                    if (place[k].grid != static_cast<int>(g))
                        continue;
                    const int j = place[k].injector;
                    V.add(s.dp[k], m.kvp(static_cast<Eigen::Index>(i), j));
                    V.add(s.dq[k], m.kvq(static_cast<Eigen::Index>(i), j));
                }
                prog.add_row(V, Sense::GreaterEqual, lv.nodes[i].vmin, "lv_vmin" + ts + id);
                prog.add_row(V, Sense::LessEqual, lv.nodes[i].vmax, "lv_vmax" + ts + id);
                s.V[g].push_back(V);
            }
            for (std::size_t b = 0; b < lv.branches.size(); ++b) {
                AffineExpr I(op.i0[b]);
                for (std::size_t k = 0; k < nres; ++k) {
                    if (place[k].grid != static_cast<int>(g))
                        continue;
                    const int j = place[k].injector;
                    I.add(s.dp[k], m.kip(static_cast<Eigen::Index>(b), j));
                    I.add(s.dq[k], m.kiq(static_cast<Eigen::Index>(b), j));
                }
                if (!I.terms().empty())
                    prog.add_row(I, Sense::LessEqual, lv.branches[b].imax,
                                 "lv_i" + ts + lv.id + ":" + lv.branches[b].name());
                s.I[g].push_back(I);
            }
        }

        // nodal balances, voltage drops, branch cones
        for (std::size_t i = 0; i < mv.nodes.size(); ++i) {
            AffineExpr bp, bq;
            for (int b : topo.children[i]) {
                bp.add(s.P[b], 1.0);
                bq.add(s.Q[b], 1.0);
            }
            const int pb = topo.parent_branch[i];
            if (pb >= 0) {
                bp.add(s.P[pb], -1.0).add(s.l[pb], mv.branches[pb].r);
                bq.add(s.Q[pb], -1.0).add(s.l[pb], mv.branches[pb].x);
            }
            for (std::size_t g = 0; g < mv.links.size(); ++g) {
                if (link_node[g] != static_cast<int>(i))
                    continue;
                const LvOperatingPoint& op = sc.lv_models[g].ops[t];
                bp.add(s.dp_sl[g]).add_constant(op.p_sl0);
                bq.add(s.dq_sl[g]).add_constant(op.q_sl0);
            }
            bp.add_constant(-sc.ts.mv[t][i].p / base);
            bq.add_constant(-sc.ts.mv[t][i].q / base);
            if (static_cast<int>(i) == topo.root) {
                bp.add(s.p_slk, -1.0);
                bq.add(s.q_slk, -1.0);
            }
            prog.add_row(bp, Sense::Equal, "balance_p" + ts + mv.nodes[i].id);
            prog.add_row(bq, Sense::Equal, "balance_q" + ts + mv.nodes[i].id);
        }
        for (std::size_t b = 0; b < mv.branches.size(); ++b) {
            const Branch& br = mv.branches[b];
            const int up = topo.upstream[b], dn = topo.downstream[b];
            AffineExpr drop(s.v[dn]);
            drop.add(s.v[up], -1.0)
                .add(s.P[b], 2.0 * br.r)
                .add(s.Q[b], 2.0 * br.x)
                .add(s.l[b], -(br.r * br.r + br.x * br.x));
            prog.add_row(drop, Sense::Equal, "drop" + ts + br.name());
            prog.add_cone(ConeKind::Rotated, {AffineExpr(s.v[up]), AffineExpr(s.l[b]), AffineExpr(s.P[b]), AffineExpr(s.Q[b])},
                          "cone" + ts + br.name());
        }

        // inverters
        for (std::size_t k = 0; k < nres; ++k) {
            const Resource& r = sc.resources[k];
            if (!r.has_inverter())
                continue;
            const AffineExpr pt = AffineExpr(sc.ts.resource[t][k].p / base) + s.dp[k];
            const AffineExpr qt = AffineExpr(sc.ts.resource[t][k].q / base) + s.dq[k];
            if (pt.terms().empty() && qt.terms().empty())
                continue;
            const std::string id = ts + r.id;
            const Box b = step_box(sc, opt, t, static_cast<int>(k));
            const double p_lo = sc.ts.resource[t][k].p + b.p_lo, p_hi = sc.ts.resource[t][k].p + b.p_hi;
            double sign = 0.0;
            if (p_lo >= 0.0)
                sign = 1.0;
            else if (p_hi <= 0.0)
                sign = -1.0;
            if (sign != 0.0 && !qt.terms().empty()) {
                const double tan_phi = std::tan(std::acos(r.pf_lim));
                prog.add_row(qt - tan_phi * sign * pt, Sense::LessEqual, "pf_hi" + id);
                prog.add_row(qt + tan_phi * sign * pt, Sense::GreaterEqual, "pf_lo" + id);
            }
            prog.add_cone(ConeKind::Standard, {AffineExpr(std::sqrt(1.1) * r.s_kva / base), pt, qt}, "inv" + id);
        }

        // storage
        s.soc.assign(nres, std::nullopt);
        for (std::size_t k = 0; k < nres; ++k) {
            const Resource& r = sc.resources[k];
            if (!r.is_storage())
                continue;
            const Var soc = prog.add_variable("soc" + ts + r.id, r.soc_min, r.soc_max);
            s.soc[k] = soc;
            AffineExpr chain(soc);
            if (t == opt.t_begin)
                chain.add_constant(-(opt.soc_start.empty() ? r.soc0 : opt.soc_start[k]));
            else
                chain.add(*f.steps.back().soc[k], -1.0);
            const double c = r.eta * dt_h / r.cap_kwh;
            chain.add_constant(c * sc.ts.resource[t][k].p).add(s.dp[k], c * base);
            prog.add_row(chain, Sense::Equal, "soc" + ts + r.id);
        }

        if (priced) {
            if (w.w_v > 0.0)
                for (std::size_t i = 0; i < mv.nodes.size(); ++i) {
                    const Node& n = mv.nodes[i];
                    const Var d = prog.add_variable("vdev" + ts + n.id, 0.0);
                    s.vdev.push_back(d);
                    prog.add_row(AffineExpr(s.v[i]) - AffineExpr(d), Sense::LessEqual, n.vmax * n.vmax, "vdev_hi" + ts + n.id);
                    prog.add_row(AffineExpr(s.v[i]) + AffineExpr(d), Sense::GreaterEqual, n.vmin * n.vmin, "vdev_lo" + ts + n.id);
                    prog.add_objective(d, w.w_v);
                }
            if (w.w_lim > 0.0)
                for (std::size_t b = 0; b < mv.branches.size(); ++b) {
                    const Branch& br = mv.branches[b];
                    const Var d = prog.add_variable("ldev" + ts + br.name(), 0.0);
                    s.ldev.push_back(d);
                    prog.add_row(AffineExpr(s.l[b]) - AffineExpr(d), Sense::LessEqual, br.imax * br.imax, "ldev" + ts + br.name());
                    prog.add_objective(d, w.w_lim);
                }
            if (w.w_l > 0.0)
                for (std::size_t b = 0; b < mv.branches.size(); ++b)
                    prog.add_objective(s.l[b], w.w_l * mv.branches[b].r);
            if (!sc.ts.tso_schedule.empty()) {
                const PQ& sch = sc.ts.tso_schedule[t];
                auto dev = [&](double weight, Var flow, double target, const std::string& name) -> std::optional<Var> {
                    if (!(weight > 0.0))
                        return std::nullopt;
                    const Var e = prog.add_variable(name + ts, 0.0);
                    prog.add_row(AffineExpr(e) - AffineExpr(flow), Sense::GreaterEqual, -target, name + ts);
                    prog.add_row(AffineExpr(e) + AffineExpr(flow), Sense::GreaterEqual, target, name + ts);
                    prog.add_objective(e, weight);
                    return e;
                };
                s.ep = dev(w.w_p, s.p_slk, sch.p / base, "sched_p");
                s.eq = dev(w.w_q, s.q_slk, sch.q / base, "sched_q");
            }
        }
        s.act.assign(nres, AffineExpr(0.0));
        if (const double wa = priced ? w.w_act : opt.tie_break; wa > 0.0)
            for (std::size_t k = 0; k < nres; ++k)
                for (int pq = 0; pq < 2; ++pq) {
                    const AffineExpr& d = pq == 0 ? s.dp[k] : s.dq[k];
                    if (d.terms().empty())
                        continue;
                    const std::string name = (pq == 0 ? "act_p" : "act_q") + ts + sc.resources[k].id;
                    const Var a = prog.add_variable(name, 0.0);
                    prog.add_row(AffineExpr(a) - d, Sense::GreaterEqual, name);
                    prog.add_row(AffineExpr(a) + d, Sense::GreaterEqual, name);
                    prog.add_objective(a, wa);
                    s.act[k].add(a, 1.0);
                }
        f.steps.push_back(std::move(s));
    }
    return f;
}

} // namespace gridflex::detail
