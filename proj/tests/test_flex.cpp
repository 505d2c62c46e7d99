#include "fixtures.hpp"

#include "gridflex/error.hpp"
#include "gridflex/flex_envelope.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gridflex;

namespace {

const ServiceClass kFast{ServiceLabel::Fast, 4.0};
const ServiceClass kSlow{ServiceLabel::Slow, 4.0};

// Lossless MV, one EV with a symmetric box on a stiff LV line.
OpfScenario box_case(double a, double b)
{
    OpfScenario sc = fixtures::lossless_pv_case();
    Resource r = fixtures::ev("ev1", "lv1", "h1");
    r.dp_lo_kw = -a;
    r.dp_hi_kw = a;
    r.dq_lo_kvar = -b;
    r.dq_hi_kvar = b;
    r.s_kva = 30.0;
    sc.resources = {r};
    sc.ts.resource = {{{0.0, 0.0}}};
    prepare_lv_models(sc);
    return sc;
}

} // namespace

TEST(Classify, RampThreshold)
{
    Resource ev = fixtures::ev("ev", "g", "n");
    Resource slow = ev;
    slow.ramp_kw_per_hr = 3.0;
    const Classification c = classify_resources({ev, slow}, 4.0);
    EXPECT_EQ(c.fast, std::vector<int>{0});
    EXPECT_EQ(c.slow_only, std::vector<int>{1});
    Resource edge = ev;
    edge.ramp_kw_per_hr = 4.0;
    EXPECT_EQ(classify_resources({edge}, 4.0).fast.size(), 1u);
}

TEST(Classify, NonPositiveThreshold)
{
    try {
        classify_resources({}, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidThreshold);
    }
}

TEST(Direction, ZeroRejected)
{
    try {
        make_direction(0.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidDirection);
    }
    const OpfScenario sc = fixtures::lossless_pv_case();
    EXPECT_THROW(max_direction(sc, {0.0, 0.0}, kSlow), Error);
    EXPECT_NEAR(Direction::from_angle(3 * std::numbers::pi / 2).theta(), 3 * std::numbers::pi / 2, 1e-12);
}

TEST(MaxDirection, CurtailmentRaisesImport)
{
    // curtailing the full 10 kW raises the P-SS import by 10 kW on a lossless feeder
    const OpfScenario sc = fixtures::lossless_pv_case();
    const EnvelopePoint up = max_direction(sc, {1.0, 0.0}, kSlow);
    EXPECT_NEAR(up.dp_kw, 10.0, 1e-4);
    EXPECT_NEAR(up.delta[0][0].p, -10.0, 1e-4);
    const EnvelopePoint down = max_direction(sc, {-1.0, 0.0}, kSlow);
    EXPECT_NEAR(down.dp_kw, 0.0, 1e-4);
}

TEST(MaxDirection, InfeasibleBaselineReported)
{
    OpfScenario sc = fixtures::lossless_pv_case();
    sc.lv[0].nodes[1].vmax = 0.5;
    try {
        max_direction(sc, {1.0, 0.0}, kSlow);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
    const FlexEnvelope env = sweep_envelope(sc, 4, kSlow);
    EXPECT_EQ(env.failures(), 4u);
    EXPECT_EQ(env.points[2].status, "Infeasible");
}

TEST(Sweep, ZeroBoxesCollapseToBaseline)
{
    OpfScenario sc = fixtures::small_case(1);
    for (Resource& r : sc.resources)
        r.dp_lo_kw = r.dp_hi_kw = r.dq_lo_kvar = r.dq_hi_kvar = 0.0;
    const FlexEnvelope env = sweep_envelope(sc, 8, kSlow);
    for (const EnvelopePoint& p : env.points) {
        ASSERT_TRUE(p.ok) << p.status;
        EXPECT_NEAR(p.dp_kw, 0.0, 1e-3);
        EXPECT_NEAR(p.dq_kvar, 0.0, 1e-3);
    }
    EXPECT_NEAR(envelope_area(env), 0.0, 1e-6);
}

TEST(Sweep, AxisAlignedBox)
{
    const double a = 6.0, b = 3.0;
    const FlexEnvelope env = sweep_envelope(box_case(a, b), 4, kSlow);
    ASSERT_EQ(env.points.size(), 4u);
    const double expect[4][2] = {{a, 0.0}, {0.0, b}, {-a, 0.0}, {0.0, -b}};
    for (int j = 0; j < 4; ++j) {
        ASSERT_TRUE(env.points[j].ok);
        EXPECT_NEAR(env.points[j].dp_kw, expect[j][0], 1e-4) << j;
        EXPECT_NEAR(env.points[j].dq_kvar, expect[j][1], 1e-4) << j;
    }
    EXPECT_NEAR(envelope_area(env), 2.0 * a * b, 1e-3);
}

TEST(Sweep, TooFewDirections)
{
    EXPECT_THROW(sweep_envelope(fixtures::lossless_pv_case(), 3, kSlow), Error);
}

TEST(Sweep, OrderedAndSupportConsistent)
{
    const OpfScenario sc = fixtures::small_case(1);
    const FlexEnvelope env = sweep_envelope(sc, 16, kSlow);
    for (std::size_t j = 0; j < env.points.size(); ++j) {
        EXPECT_NEAR(env.points[j].theta, 2.0 * std::numbers::pi * j / 16, 1e-12);
        ASSERT_TRUE(env.points[j].ok);
        const Direction d = Direction::from_angle(env.points[j].theta);
        const double h = d.alpha * env.points[j].dp_kw + d.beta * env.points[j].dq_kvar;
        for (const EnvelopePoint& q : env.points)
            EXPECT_LE(d.alpha * q.dp_kw + d.beta * q.dq_kvar, h + 1e-3);
        EXPECT_LE(env.points[j].relaxation_gap, 1e-6);
    }
}

TEST(Sweep, DeterministicAcrossThreads)
{
    const OpfScenario sc = fixtures::small_case(1);
    EnvelopeOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const FlexEnvelope a = sweep_envelope(sc, 8, kSlow, one);
    const FlexEnvelope b = sweep_envelope(sc, 8, kSlow, many);
    for (std::size_t j = 0; j < a.points.size(); ++j) {
        EXPECT_EQ(a.points[j].dp_kw, b.points[j].dp_kw);
        EXPECT_EQ(a.points[j].dq_kvar, b.points[j].dq_kvar);
    }
}

TEST(Report, FastInsideSlow)
{
    OpfScenario sc = fixtures::small_case(1);
    sc.resources[0].ramp_kw_per_hr = 3.0;  // PV becomes slow-only
    const FlexEnvelope fast = sweep_envelope(sc, 16, kFast);
    const FlexEnvelope slow = sweep_envelope(sc, 16, kSlow);
    const EnvelopeComparison c = envelope_report(fast, slow);
    EXPECT_TRUE(c.contained) << c.max_outside_kw;
    EXPECT_GT(c.fast_area, 0.0);
    EXPECT_LT(c.fast_area, c.slow_area);
    for (double r : c.ratio)
        EXPECT_LE(r, 1.0 + 1e-6);
}

TEST(Report, AllFastMeansRatioOne)
{
    const OpfScenario sc = fixtures::small_case(1);
    const EnvelopeComparison c = envelope_report(sweep_envelope(sc, 8, kFast), sweep_envelope(sc, 8, kSlow));
    for (double r : c.ratio)
        EXPECT_NEAR(r, 1.0, 1e-6);
    EXPECT_NEAR(c.fast_area, c.slow_area, 1e-6 * c.slow_area);
}

TEST(Report, NoFastResources)
{
    OpfScenario sc = fixtures::small_case(1);
    for (Resource& r : sc.resources)
        r.ramp_kw_per_hr = 2.0;
    const FlexEnvelope fast = sweep_envelope(sc, 8, kFast);
    for (const EnvelopePoint& p : fast.points) {
        EXPECT_NEAR(p.dp_kw, 0.0, 1e-3);
        EXPECT_NEAR(p.dq_kvar, 0.0, 1e-3);
    }
    EXPECT_NEAR(envelope_area(fast), 0.0, 1e-6);
}

TEST(Report, MismatchedScenario)
{
    const OpfScenario a = fixtures::small_case(1);
    OpfScenario b = fixtures::lossless_pv_case();
    const FlexEnvelope ea = sweep_envelope(a, 4, kFast);
    try {
        envelope_report(ea, sweep_envelope(b, 4, kSlow));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MismatchedScenario);
    }
    EXPECT_THROW(envelope_report(ea, sweep_envelope(a, 8, kSlow)), Error);
}

TEST(Report, HullDistance)
{
    FlexEnvelope env;
    for (auto [p, q] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}) {
        EnvelopePoint pt;
        pt.ok = true;
        pt.dp_kw = p;
        pt.dq_kvar = q;
        env.points.push_back(pt);
    }
    EXPECT_EQ(distance_outside_hull(env, {0.2, 0.2}), 0.0);
    EXPECT_NEAR(distance_outside_hull(env, {1.0, 1.0}), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(envelope_area(env), 2.0, 1e-12);
}

TEST(Horizon, MeanOverSteps)
{
    OpfScenario sc = fixtures::lossless_pv_case();
    sc.ts.horizon = 3;
    sc.ts.mv.assign(3, sc.ts.mv[0]);
    sc.ts.lv.assign(3, sc.ts.lv[0]);
    sc.ts.resource = {{{18.0, 0.0}}, {{6.0, 0.0}}, {{18.0, 0.0}}};
    prepare_lv_models(sc);
    EnvelopeOptions opt;
    opt.mode = EnvelopeMode::Horizon;
    const EnvelopePoint p = max_direction(sc, {1.0, 0.0}, kSlow, opt);
    // 10 + 6 + 10 kW of curtailment, averaged
    EXPECT_NEAR(p.dp_kw, 26.0 / 3.0, 1e-4);
    ASSERT_EQ(p.delta.size(), 3u);
    EXPECT_NEAR(p.delta[1][0].p, -6.0, 1e-4);
}

TEST(Horizon, RampCouplesSteps)
{
    OpfScenario sc = fixtures::lossless_pv_case();
    sc.resources[0].ramp_kw_per_hr = 24.0;  // 4 kW per 10-min step
    sc.ts.horizon = 3;
    sc.ts.mv.assign(3, sc.ts.mv[0]);
    sc.ts.lv.assign(3, sc.ts.lv[0]);
    sc.ts.resource.assign(3, sc.ts.resource[0]);
    prepare_lv_models(sc);
    EnvelopeOptions opt;
    opt.mode = EnvelopeMode::Horizon;
    const EnvelopePoint p = max_direction(sc, {1.0, 0.0}, kSlow, opt);
    EXPECT_NEAR(p.delta[0][0].p, -4.0, 1e-4);
    EXPECT_NEAR(p.delta[1][0].p, -8.0, 1e-4);
    EXPECT_NEAR(p.delta[2][0].p, -10.0, 1e-4);
}

TEST(PreQualification, OracleRespectsLimitsUpToLinearization)
{
    OpfScenario sc = fixtures::small_case(1);
    const FlexEnvelope env = sweep_envelope(sc, 12, kSlow);
    for (const EnvelopePoint& p : env.points) {
        ASSERT_TRUE(p.ok);
        const CoupledState cs = simulate_step(sc, 0, 1.0, &p.delta[0]);
        const LvNetwork& lv = sc.lv[0];
        for (std::size_t i = 0; i < lv.nodes.size(); ++i) {
            const double err = std::abs(cs.lv[0].V[i] - p.lv[0][0].V[i]);
            EXPECT_LE(cs.lv[0].V[i], lv.nodes[i].vmax + err + 1e-9);
            EXPECT_GE(cs.lv[0].V[i], lv.nodes[i].vmin - err - 1e-9);
        }
        for (std::size_t b = 0; b < lv.branches.size(); ++b) {
            const double err = std::abs(cs.lv[0].I[b] - p.lv[0][0].I[b]);
            EXPECT_LE(cs.lv[0].I[b], lv.branches[b].imax + err + 1e-9);
        }
    }
}
