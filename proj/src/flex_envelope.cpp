#include "gridflex/flex_envelope.hpp"

#include "formulation.hpp"
#include "gridflex/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace gridflex {

std::string to_string(ServiceLabel s) { return s == ServiceLabel::Fast ? "FAST" : "SLOW"; }

Classification classify_resources(const std::vector<Resource>& resources, double r_thresh)
{
    if (!(r_thresh > 0.0) || !std::isfinite(r_thresh))
        throw Error(ErrorCode::InvalidThreshold, "ramp threshold must be > 0, got " + std::to_string(r_thresh));
    Classification c;
    for (std::size_t k = 0; k < resources.size(); ++k)
        (resources[k].ramp_kw_per_hr >= r_thresh ? c.fast : c.slow_only).push_back(static_cast<int>(k));
    return c;
}

Direction Direction::from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

double Direction::theta() const
{
    const double t = std::atan2(beta, alpha);
    return t < 0.0 ? t + 2.0 * std::numbers::pi : t;
}

Direction make_direction(double alpha, double beta)
{
    if (!std::isfinite(alpha) || !std::isfinite(beta) || (alpha == 0.0 && beta == 0.0))
        throw Error(ErrorCode::InvalidDirection, "direction must be finite and nonzero");
    return {alpha, beta};
}

std::size_t FlexEnvelope::failures() const
{
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const EnvelopePoint& p) { return !p.ok; }));
}

namespace {

struct Window {
    int begin = 0;
    int end = 1;
};

Window window_of(const OpfScenario& sc, const EnvelopeOptions& opt)
{
    if (opt.step < 0 || opt.step >= sc.ts.horizon)
        throw Error(ErrorCode::InvalidArgument, "envelope step " + std::to_string(opt.step) + " outside the horizon");
    if (opt.mode == EnvelopeMode::Step)
        return {opt.step, opt.step + 1};
    const int end = opt.span > 0 ? std::min(sc.ts.horizon, opt.step + opt.span) : sc.ts.horizon;
    return {opt.step, end};
}

// P-SS import at zero change, consistent with the linear transformer flows of the program.
std::vector<PQ> baseline_import(const OpfScenario& sc, Window w)
{
    const double v = sc.options.slack_v_nominal * sc.options.slack_v_nominal;
    std::vector<PQ> out;
    for (int t = w.begin; t < w.end; ++t) {
        std::vector<LinkFlow> flows;
        for (const LvModelSet& m : sc.lv_models)
            flows.push_back({m.ops[t].p_sl0, m.ops[t].q_sl0});
        const MvState s = solve_distflow_fixed_point(sc.mv, mv_injections(sc, t), v, flows);
        out.push_back({s.p_slack, s.q_slack});
    }
    return out;
}

std::vector<bool> frozen_mask(const OpfScenario& sc, const ServiceClass& service)
{
    const Classification c = classify_resources(sc.resources, service.r_thresh);
    std::vector<bool> frozen(sc.resources.size(), false);
    if (service.label == ServiceLabel::Fast)
        for (int k : c.slow_only)
            frozen[k] = true;
    return frozen;
}

EnvelopePoint solve_once(const OpfScenario& sc, Direction d, const std::vector<bool>& frozen, Window w,
                         const std::vector<PQ>& base, const EnvelopeOptions& opt,
                         const std::vector<std::vector<PQ>>& reward)
{
    detail::BuildOptions bo;
    bo.t_begin = w.begin;
    bo.t_end = w.end;
    bo.security = detail::Security::Hard;
    bo.slack_v_lo = bo.slack_v_hi = sc.options.slack_v_nominal * sc.options.slack_v_nominal;
    bo.frozen = frozen;
    bo.ramp = true;
    bo.tie_break = 1e-4;
    if (w.begin > 0) {
        const auto soc = detail::baseline_soc(sc);
        bo.soc_start = soc[w.begin - 1];
    }
    const double n = w.end - w.begin;

    conic::SolverSettings ss;
    ss.tol = {opt.feas_tol, opt.gap_tol};
    ss.max_iterations = 200;

    // Fictitious losses would raise the P-SS import for free, so branch currents
    // carry a cost above their marginal effect on the objective; it grows if the
    // cones still come out loose.
    double boost = 1.0;
    for (int attempt = 0;; ++attempt) {
        detail::Formulation f = detail::build_formulation(sc, bo);
        for (const detail::StepVars& s : f.steps) {
            f.prog.add_objective(s.p_slk, -d.alpha / n);
            f.prog.add_objective(s.q_slk, -d.beta / n);
            if (!reward.empty())
                for (std::size_t g = 0; g < sc.lv.size(); ++g) {
                    const PQ& c = reward[s.t - w.begin][g];
                    f.prog.add_objective(s.dp_sl[g], -c.p / n);
                    f.prog.add_objective(s.dq_sl[g], -c.q / n);
                }
            for (std::size_t b = 0; b < sc.mv.branches.size(); ++b) {
                const Branch& br = sc.mv.branches[b];
                const double m = std::max(0.0, d.alpha * br.r + d.beta * br.x) / n;
                const double c = m + boost * (1e-3 * m + 1e-5 * (br.r + std::abs(br.x)) + 1e-6);
                f.prog.add_objective(s.l[b], c);
            }
        }
        const conic::Solution sol = detail::solve_relaxing(f.prog, ss);
        if (sol.status == conic::Status::Infeasible)
            throw Error(ErrorCode::Infeasible, "no change satisfies the hard limits: " + sol.diagnostics);
        if (sol.status != conic::Status::Optimal)
            throw Error(ErrorCode::SolveFailed, conic::to_string(sol.status) + " " + sol.diagnostics);

        EnvelopePoint pt;
        pt.theta = d.theta();
        pt.ok = true;
        pt.status = conic::to_string(sol.status);
        const double basekva = sc.base();
        for (std::size_t i = 0; i < f.steps.size(); ++i) {
            const detail::StepVars& s = f.steps[i];
            const int t = s.t;
            MvState mv;
            for (conic::Var v : s.v)
                mv.v.push_back(sol.x[v.index]);
            for (std::size_t b = 0; b < sc.mv.branches.size(); ++b) {
                mv.P.push_back(sol.x[s.P[b].index]);
                mv.Q.push_back(sol.x[s.Q[b].index]);
                mv.l.push_back(sol.x[s.l[b].index]);
                const double gap = mv.v[f.topo.upstream[b]] * mv.l[b] - mv.P[b] * mv.P[b] - mv.Q[b] * mv.Q[b];
                pt.relaxation_gap = std::max(pt.relaxation_gap, gap);
            }
            mv.p_slack = sol.x[s.p_slk.index];
            mv.q_slack = sol.x[s.q_slk.index];
            std::vector<LvState> lv;
            for (std::size_t g = 0; g < sc.lv.size(); ++g) {
                LvState st;
                st.dp_sl = detail::value(s.dp_sl[g], sol.x);
                st.dq_sl = detail::value(s.dq_sl[g], sol.x);
                for (const auto& e : s.V[g])
                    st.V.push_back(detail::value(e, sol.x));
                for (const auto& e : s.I[g])
                    st.I.push_back(detail::value(e, sol.x));
                mv.p_lv.push_back(sc.lv_models[g].ops[t].p_sl0 + st.dp_sl);
                mv.q_lv.push_back(sc.lv_models[g].ops[t].q_sl0 + st.dq_sl);
                lv.push_back(std::move(st));
            }
            std::vector<PQ> delta;
            for (std::size_t k = 0; k < sc.resources.size(); ++k)
                delta.push_back({detail::value(s.dp[k], sol.x) * basekva, detail::value(s.dq[k], sol.x) * basekva});
            pt.dp_kw += (mv.p_slack - base[i].p) * basekva / n;
            pt.dq_kvar += (mv.q_slack - base[i].q) * basekva / n;
            pt.delta.push_back(std::move(delta));
            pt.mv.push_back(std::move(mv));
            pt.lv.push_back(std::move(lv));
        }
        if (pt.relaxation_gap <= 1e-7 || attempt >= 4)
            return pt;
        boost *= 10.0;
    }
}

// Marginal value of MV losses per unit of LV withdrawal, per step and grid, at
// the transformer flows of a solved point.
std::vector<std::vector<PQ>> loss_reward(const OpfScenario& sc, Direction d, const EnvelopePoint& pt, Window w)
{
    const double v = sc.options.slack_v_nominal * sc.options.slack_v_nominal;
    const double h = 1e-6;
    std::vector<std::vector<PQ>> out;
    for (int t = w.begin; t < w.end; ++t) {
        const MvState& at = pt.mv[t - w.begin];
        const auto inj = mv_injections(sc, t);
        std::vector<LinkFlow> flows;
        for (std::size_t g = 0; g < sc.lv.size(); ++g)
            flows.push_back({at.p_lv[g], at.q_lv[g]});
        std::vector<PQ> row;
        for (std::size_t g = 0; g < sc.lv.size(); ++g) {
            PQ c;
            for (int pq = 0; pq < 2; ++pq) {
                auto shifted = [&](double e) {
                    std::vector<LinkFlow> f = flows;
                    (pq == 0 ? f[g].p : f[g].q) += e;
                    return solve_distflow_fixed_point(sc.mv, inj, v, f);
                };
                const MvState hi = shifted(h), lo = shifted(-h);
                const double dps = (hi.p_slack - lo.p_slack) / (2 * h) - (pq == 0 ? 1.0 : 0.0);
                const double dqs = (hi.q_slack - lo.q_slack) / (2 * h) - (pq == 1 ? 1.0 : 0.0);
                (pq == 0 ? c.p : c.q) = d.alpha * dps + d.beta * dqs;
            }
            row.push_back(c);
        }
        out.push_back(std::move(row));
    }
    return out;
}

// Losses are convex in the withdrawals, so rewarding their linearization at the
// previous point can only move the support outwards; a few passes settle it.
EnvelopePoint solve_direction(const OpfScenario& sc, Direction d, const std::vector<bool>& frozen, Window w,
                              const std::vector<PQ>& base, const EnvelopeOptions& opt)
{
    EnvelopePoint best = solve_once(sc, d, frozen, w, base, opt, {});
    if (sc.mv.branches.empty() || sc.lv.empty())
        return best;
    double score = d.alpha * best.dp_kw + d.beta * best.dq_kvar;
    for (int pass = 0; pass < 4; ++pass) {
        EnvelopePoint next = solve_once(sc, d, frozen, w, base, opt, loss_reward(sc, d, best, w));
        const double s = d.alpha * next.dp_kw + d.beta * next.dq_kvar;
        if (!(s > score))
            break;
        const bool settled = s - score < 1e-7 * sc.base();
        best = std::move(next);
        score = s;
        if (settled)
            break;
    }
    return best;
}

int thread_count(const EnvelopeOptions& opt, int jobs)
{
    int n = opt.threads;
    if (n <= 0) {
        n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        if (const char* env = std::getenv("GRIDFLEX_THREADS")) {
            const int cap = std::atoi(env);
            if (cap > 0)
                n = std::min(n, cap);
        }
    }
    return std::max(1, std::min(n, jobs));
}

} // namespace

EnvelopePoint max_direction(const OpfScenario& sc, Direction d, const ServiceClass& service,
                            const EnvelopeOptions& opt)
{
    d = make_direction(d.alpha, d.beta);
    detail::require_models(sc);
    const Window w = window_of(sc, opt);
    return solve_direction(sc, d, frozen_mask(sc, service), w, baseline_import(sc, w), opt);
}

FlexEnvelope sweep_envelope(const OpfScenario& sc, int n_dirs, const ServiceClass& service,
                            const EnvelopeOptions& opt)
{
    if (n_dirs < 4)
        throw Error(ErrorCode::InvalidArgument, "an envelope needs at least 4 directions, got " + std::to_string(n_dirs));
    detail::require_models(sc);
    const Window w = window_of(sc, opt);
    const std::vector<bool> frozen = frozen_mask(sc, service);
    const std::vector<PQ> base = baseline_import(sc, w);

    FlexEnvelope env;
    env.scenario = sc.name;
    env.service = service;
    env.mode = opt.mode;
    env.step = w.begin;
    env.span = w.end - w.begin;
    env.n_dirs = n_dirs;
    for (const PQ& b : base) {
        env.baseline_kw.p += b.p * sc.base() / env.span;
        env.baseline_kw.q += b.q * sc.base() / env.span;
    }
    env.points.resize(static_cast<std::size_t>(n_dirs));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int j = next++; j < n_dirs; j = next++) {
            const double theta = 2.0 * std::numbers::pi * j / n_dirs;
            EnvelopePoint& pt = env.points[j];
            try {
                pt = solve_direction(sc, Direction::from_angle(theta), frozen, w, base, opt);
            } catch (const Error& e) {
                pt = EnvelopePoint{};
                pt.ok = false;
                pt.status = to_string(e.code());
            }
            pt.theta = theta;
        }
    };
    const int nt = thread_count(opt, n_dirs);
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nt; ++i)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
    }
    return env;
}

double envelope_area(const FlexEnvelope& env)
{
    std::vector<PQ> pts;
    for (const EnvelopePoint& p : env.points)
        if (p.ok)
            pts.push_back({p.dp_kw, p.dq_kvar});
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const PQ& u = pts[i];
        const PQ& v = pts[(i + 1) % pts.size()];
        a += u.p * v.q - v.p * u.q;
    }
    return std::abs(a) / 2.0;
}

namespace {

double cross(const PQ& o, const PQ& a, const PQ& b) { return (a.p - o.p) * (b.q - o.q) - (a.q - o.q) * (b.p - o.p); }

std::vector<PQ> convex_hull(std::vector<PQ> pts)
{
    std::sort(pts.begin(), pts.end(), [](const PQ& a, const PQ& b) { return a.p < b.p || (a.p == b.p && a.q < b.q); });
    if (pts.size() < 3)
        return pts;
    std::vector<PQ> h(2 * pts.size());
    std::size_t k = 0;
    for (const PQ& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0)
            --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
        while (k >= lo && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0)
            --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

double segment_distance(const PQ& a, const PQ& b, const PQ& p)
{
    const double dx = b.p - a.p, dy = b.q - a.q;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.p - a.p) * dx + (p.q - a.q) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.p - (a.p + t * dx), p.q - (a.q + t * dy));
}

} // namespace

double distance_outside_hull(const FlexEnvelope& env, PQ point)
{
    std::vector<PQ> pts;
    for (const EnvelopePoint& p : env.points)
        if (p.ok)
            pts.push_back({p.dp_kw, p.dq_kvar});
    if (pts.empty())
        return std::numeric_limits<double>::infinity();
    const std::vector<PQ> h = convex_hull(pts);
    if (h.size() == 1)
        return std::hypot(point.p - h[0].p, point.q - h[0].q);
    bool inside = h.size() >= 3;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h.size(); ++i) {
        const PQ& a = h[i];
        const PQ& b = h[(i + 1) % h.size()];
        if (cross(a, b, point) < 0.0)
            inside = false;
        dist = std::min(dist, segment_distance(a, b, point));
    }
    return inside ? 0.0 : dist;
}

EnvelopeComparison envelope_report(const FlexEnvelope& fast, const FlexEnvelope& slow, double tol_kw)
{
    const bool same_base = std::abs(fast.baseline_kw.p - slow.baseline_kw.p) <= 1e-6 &&
                           std::abs(fast.baseline_kw.q - slow.baseline_kw.q) <= 1e-6;
    if (fast.scenario != slow.scenario || fast.n_dirs != slow.n_dirs || fast.step != slow.step ||
        fast.span != slow.span || fast.mode != slow.mode || !same_base)
        throw Error(ErrorCode::MismatchedScenario, "envelopes were computed on different scenarios or settings");
    EnvelopeComparison c;
    c.fast_area = envelope_area(fast);
    c.slow_area = envelope_area(slow);
    for (std::size_t j = 0; j < fast.points.size(); ++j) {
        const EnvelopePoint& f = fast.points[j];
        const EnvelopePoint& s = slow.points[j];
        const Direction d = Direction::from_angle(f.theta);
        const double hf = d.alpha * f.dp_kw + d.beta * f.dq_kvar;
        const double hs = d.alpha * s.dp_kw + d.beta * s.dq_kvar;
        if (!f.ok || !s.ok)
            c.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
        else if (std::abs(hs) <= tol_kw)
            c.ratio.push_back(std::abs(hf) <= tol_kw ? 1.0 : std::numeric_limits<double>::infinity());
        else
            c.ratio.push_back(hf / hs);
    }
    c.contained = true;
    for (const EnvelopePoint& f : fast.points) {
        if (!f.ok)
            continue;
        const double out = distance_outside_hull(slow, {f.dp_kw, f.dq_kvar});
        c.max_outside_kw = std::max(c.max_outside_kw, out);
        if (out > tol_kw)
            c.contained = false;
    }
    return c;
}

} // namespace gridflex
