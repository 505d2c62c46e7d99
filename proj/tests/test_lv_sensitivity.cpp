#include "gridflex/error.hpp"
#include "gridflex/lv_sensitivity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace gridflex;

namespace {

LvNetwork single_line()
{
    LvNetwork lv;
    lv.id = "lv";
    lv.root = "t";
    lv.nodes = {{"t", 0.9, 1.1}, {"a", 0.9, 1.1}};
    lv.branches = {{"t", "a", 0.05, 0.02, 0.5}};
    return lv;
}

// t - a - b - c with a lateral a - d
LvNetwork feeder()
{
    LvNetwork lv;
    lv.id = "lv1";
    lv.root = "t";
    lv.nodes = {{"t", 0.9, 1.1}, {"a", 0.9, 1.1}, {"b", 0.9, 1.1}, {"c", 0.9, 1.1}, {"d", 0.9, 1.1}};
    lv.branches = {{"t", "a", 0.03, 0.01, 0.4},
                   {"a", "b", 0.05, 0.015, 0.3},
                   {"b", "c", 0.06, 0.02, 0.2},
                   {"a", "d", 0.04, 0.01, 0.2}};
    return lv;
}

LvInjection loaded(const LvNetwork& lv)
{
    LvInjection inj{std::vector<double>(lv.nodes.size(), 0.0), std::vector<double>(lv.nodes.size(), 0.0)};
    // loads only, so no branch current passes through zero under the perturbations used here
    inj.p = {0.0, -0.04, -0.03, -0.02, -0.03};
    inj.q = {0.0, -0.01, -0.008, -0.005, -0.006};
    return inj;
}

double linear_error(const LvNetwork& lv, const SensitivityModel& m, const LvOperatingPoint& op,
                    const LvInjection& base, const Eigen::VectorXd& dir, double delta)
{
    const Eigen::VectorXd dp = delta * dir, dq = 0.3 * delta * dir;
    LvInjection pert = base;
    for (std::size_t k = 0; k < m.layout.injectors.size(); ++k) {
        const int n = lv.node_index(m.layout.injectors[k]);
        pert.p[n] += dp(k);
        pert.q[n] += dq(k);
    }
    const LvLoadFlow truth = lv_load_flow(lv, pert, op.root_voltage);
    const LvState pred = predict_state(m, op, dp, dq);
    double err = 0.0;
    for (std::size_t i = 0; i < truth.V.size(); ++i)
        err = std::max(err, std::abs(truth.V[i] - pred.V[i]));
    for (std::size_t b = 0; b < truth.I.size(); ++b)
        err = std::max(err, std::abs(truth.I[b] - pred.I[b]));
    return err;
}

} // namespace

TEST(ReferenceCoefficients, SingleLineMatchesResistance)
{
    const LvNetwork lv = single_line();
    const LvInjection flat{{0.0, 0.0}, {0.0, 0.0}};
    ReferenceOptions opt;
    opt.epsilon = 1e-4;
    const SensitivityModel m = coefficients_from_reference(lv, flat, 1.0, opt);
    // dV/dP = r and dV/dQ = x at a flat, unloaded start
    EXPECT_NEAR(m.kvp(1, 0), 0.05, 1e-8);
    EXPECT_NEAR(m.kvq(1, 0), 0.02, 1e-8);
}

TEST(ReferenceCoefficients, RootRowIsZero)
{
    const LvNetwork lv = feeder();
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    EXPECT_EQ(m.kvp.row(0).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(m.kvq.row(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ReferenceCoefficients, DiagonalVoltageCoefficientsPositive)
{
    const LvNetwork lv = feeder();
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    for (std::size_t k = 0; k < m.layout.injectors.size(); ++k) {
        const int i = lv.node_index(m.layout.injectors[k]);
        EXPECT_GT(m.kvp(i, static_cast<Eigen::Index>(k)), 0.0);
    }
}

TEST(ReferenceCoefficients, RejectsNonPositivePerturbation)
{
    const LvNetwork lv = single_line();
    ReferenceOptions opt;
    opt.epsilon = 0.0;
    try {
        coefficients_from_reference(lv, {{0, 0}, {0, 0}}, 1.0, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidPerturbation);
    }
}

TEST(ReferenceCoefficients, OracleFailureAtCollapse)
{
    const LvNetwork lv = single_line();
    try {
        coefficients_from_reference(lv, {{0, -6.0}, {0, 0}}, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleFailure);
    }
}

TEST(ReferenceCoefficients, TransformerTermsNearLossless)
{
    const LvNetwork lv = feeder();
    ReferenceOptions opt;
    opt.transformer_terms = true;
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0, opt);
    ASSERT_TRUE(m.has_transformer_terms());
    // marginal losses of a few percent on top of the lossless -1
    for (Eigen::Index k = 0; k < m.tpp.size(); ++k) {
        EXPECT_LT(m.tpp(k), -1.0);
        EXPECT_NEAR(m.tpp(k), -1.0, 0.05);
        EXPECT_NEAR(m.tqq(k), -1.0, 0.05);
    }
}

TEST(Prediction, ZeroDeltaIsOperatingPoint)
{
    const LvNetwork lv = feeder();
    const LvOperatingPoint op = lv_operating_point(lv, loaded(lv), 1.0);
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    const LvState s = predict_state(m, op, std::vector<NodeDelta>{});
    EXPECT_EQ(s.V, op.v0);
    EXPECT_EQ(s.I, op.i0);
    EXPECT_EQ(s.dp_sl, 0.0);
}

TEST(Prediction, SingleInjectionScalesColumn)
{
    const LvNetwork lv = feeder();
    const LvOperatingPoint op = lv_operating_point(lv, loaded(lv), 1.0);
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    const LvState s = predict_state(m, op, {{"c", 0.01, 0.0}});
    const int k = m.layout.injector_index("c");
    for (std::size_t i = 0; i < s.V.size(); ++i)
        EXPECT_NEAR(s.V[i] - op.v0[i], 0.01 * m.kvp(static_cast<Eigen::Index>(i), k), 1e-15);
    EXPECT_NEAR(s.dp_sl, -0.01, 1e-15);
}

TEST(Prediction, Linearity)
{
    const LvNetwork lv = feeder();
    const LvOperatingPoint op = lv_operating_point(lv, loaded(lv), 1.0);
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    const std::vector<NodeDelta> d1{{"a", 0.01, -0.002}, {"c", -0.004, 0.0}};
    const std::vector<NodeDelta> d2{{"b", 0.003, 0.001}, {"c", 0.002, 0.004}};
    std::vector<NodeDelta> sum = d1;
    sum.insert(sum.end(), d2.begin(), d2.end());
    const LvState s1 = predict_state(m, op, d1), s2 = predict_state(m, op, d2), s12 = predict_state(m, op, sum);
    for (std::size_t i = 0; i < op.v0.size(); ++i)
        EXPECT_NEAR((s1.V[i] - op.v0[i]) + (s2.V[i] - op.v0[i]), s12.V[i] - op.v0[i], 1e-15);
    for (std::size_t b = 0; b < op.i0.size(); ++b)
        EXPECT_NEAR((s1.I[b] - op.i0[b]) + (s2.I[b] - op.i0[b]), s12.I[b] - op.i0[b], 1e-15);
}

TEST(Prediction, UnknownNode)
{
    const LvNetwork lv = feeder();
    const LvOperatingPoint op = lv_operating_point(lv, loaded(lv), 1.0);
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0);
    try {
        predict_state(m, op, {{"nope", 0.01, 0.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownNode);
    }
}

TEST(Prediction, SecondOrderTruncation)
{
    const LvNetwork lv = feeder();
    const LvInjection base = loaded(lv);
    const LvOperatingPoint op = lv_operating_point(lv, base, 1.0);
    const SensitivityModel m = coefficients_from_reference(lv, base, 1.0);
    Eigen::VectorXd dir(4);
    dir << 1.0, -0.5, -0.8, 0.3;
    double delta = 0.05 * lv.rating();
    for (int halving = 0; halving < 3; ++halving, delta /= 2.0) {
        const double ratio = linear_error(lv, m, op, base, dir, delta) /
                             linear_error(lv, m, op, base, dir, delta / 2.0);
        EXPECT_GE(ratio, 3.5);
        EXPECT_LE(ratio, 4.5);
    }
}

TEST(Coupling, LinearizedSquareRoot)
{
    EXPECT_DOUBLE_EQ(couple_lv_voltage(1.0, 0.02), 0.98);
    EXPECT_NEAR(couple_lv_voltage(0.9801, 0.0) - 0.99, 5.0e-5, 1e-15);
    EXPECT_NEAR(couple_lv_voltage(0.81, 0.0) - 0.90, 5.0e-3, 1e-15);
}

TEST(Coupling, ErrorBoundOnOperatingBand)
{
    double worst = 0.0, arg = 0.0;
    for (int k = 0; k <= 4000; ++k) {
        const double v = 0.81 + 1e-4 * k;
        const double e = std::abs(couple_lv_voltage(v, 0.0) - std::sqrt(v));
        if (e > worst) {
            worst = e;
            arg = v;
        }
    }
    EXPECT_LE(worst, 5.1e-3);
    // (sqrt(v) - 1)^2 / 2 is 0.005 at both ends of the band
    EXPECT_TRUE(std::abs(arg - 0.81) < 1e-9 || std::abs(arg - 1.21) < 1e-9);
    EXPECT_NEAR(worst, 0.005, 1e-12);
}

namespace {

std::vector<MeasurementSample> synthetic(const LvLayout& L, const Eigen::MatrixXd& Kv, const Eigen::MatrixXd& Ki,
                                         int n, double noise, std::mt19937& rng)
{
    const auto nk = static_cast<Eigen::Index>(L.injectors.size());
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<MeasurementSample> out;
    for (int s = 0; s < n; ++s) {
        MeasurementSample m;
        m.dP.resize(nk);
        m.dQ.resize(nk);
        for (Eigen::Index k = 0; k < nk; ++k) {
            m.dP(k) = 0.01 * g(rng);
            m.dQ(k) = 0.005 * g(rng);
        }
        Eigen::VectorXd x(2 * nk);
        x << m.dP, m.dQ;
        m.dV = Kv * x;
        m.dI = Ki * x;
        for (Eigen::Index i = 0; i < m.dV.size(); ++i)
            m.dV(i) += noise * g(rng);
        for (Eigen::Index i = 0; i < m.dI.size(); ++i)
            m.dI(i) += noise * g(rng);
        out.push_back(m);
    }
    return out;
}

} // namespace

TEST(MeasuredCoefficients, RecoversGeneratingMap)
{
    const LvNetwork lv = feeder();
    const SensitivityModel ref = coefficients_from_reference(lv, loaded(lv), 1.0);
    Eigen::MatrixXd Kv(ref.kvp.rows(), 8), Ki(ref.kip.rows(), 8);
    Kv << ref.kvp, ref.kvq;
    Ki << ref.kip, ref.kiq;
    std::mt19937 rng(1);
    const MeasurementFit fit = coefficients_from_measurements(ref.layout, synthetic(ref.layout, Kv, Ki, 50, 0.0, rng));
    EXPECT_LE((fit.model.kvp - ref.kvp).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fit.model.kvq - ref.kvq).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fit.model.kip - ref.kip).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fit.model.kiq - ref.kiq).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(fit.rms_v.maxCoeff(), 1e-12);
}

TEST(MeasuredCoefficients, Underdetermined)
{
    const LvLayout L = LvLayout::of(feeder());
    std::vector<MeasurementSample> few(3);
    try {
        coefficients_from_measurements(L, few);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Underdetermined);
    }
}

TEST(MeasuredCoefficients, CollinearInjectionsAreRankDeficient)
{
    const LvNetwork lv = feeder();
    const LvLayout L = LvLayout::of(lv);
    std::mt19937 rng(2);
    Eigen::MatrixXd Kv = Eigen::MatrixXd::Ones(5, 8), Ki = Eigen::MatrixXd::Ones(4, 8);
    std::vector<MeasurementSample> s = synthetic(L, Kv, Ki, 40, 0.0, rng);
    for (auto& m : s)
        m.dP(3) = 2.0 * m.dP(1);
    try {
        coefficients_from_measurements(L, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
        EXPECT_NE(std::string(e.what()).find("P:"), std::string::npos);
    }
    // a ridge term makes the same data solvable
    EXPECT_NO_THROW(coefficients_from_measurements(L, s, 1e-8));
}

TEST(MeasuredCoefficients, NoiseLevelIsReportedAndErrorShrinks)
{
    const LvNetwork lv = feeder();
    const SensitivityModel ref = coefficients_from_reference(lv, loaded(lv), 1.0);
    Eigen::MatrixXd Kv(ref.kvp.rows(), 8), Ki(ref.kip.rows(), 8);
    Kv << ref.kvp, ref.kvq;
    Ki << ref.kip, ref.kiq;
    const double sigma = 1e-3;
    std::mt19937 rng(3);
    double prev_err = 1e9;
    for (int n : {200, 3200}) {
        const MeasurementFit fit = coefficients_from_measurements(ref.layout, synthetic(ref.layout, Kv, Ki, n, sigma, rng));
        for (Eigen::Index i = 0; i < fit.rms_v.size(); ++i)
            EXPECT_NEAR(fit.rms_v(i), sigma, 0.15 * sigma);
        const double err = (fit.model.kvp - ref.kvp).cwiseAbs().maxCoeff();
        EXPECT_LT(err, prev_err);
        prev_err = err;
    }
}

TEST(CoefficientCsv, RoundTrip)
{
    const LvNetwork lv = feeder();
    ReferenceOptions opt;
    opt.transformer_terms = true;
    const SensitivityModel m = coefficients_from_reference(lv, loaded(lv), 1.0, opt);
    std::stringstream ss;
    write_coefficients(ss, m);
    const SensitivityModel back = read_coefficients(ss, m.layout);
    EXPECT_EQ(back.kvp, m.kvp);
    EXPECT_EQ(back.kvq, m.kvq);
    EXPECT_EQ(back.kip, m.kip);
    EXPECT_EQ(back.kiq, m.kiq);
    EXPECT_EQ(back.tpp, m.tpp);
    EXPECT_EQ(back.tqq, m.tqq);
}

TEST(CoefficientCsv, UnknownInjector)
{
    std::stringstream ss("observed,injector,kvp,kvq,kip,kiq\na,zz,1,0,0,0\n");
    try {
        read_coefficients(ss, LvLayout::of(feeder()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CrossRefError);
    }
}

TEST(TrustRegion, TwentyPercentOfRating)
{
    const LvNetwork lv = feeder();
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(4);
    dp(2) = 0.19 * lv.rating();
    EXPECT_TRUE(within_trust_region(lv, dp));
    dp(2) = -0.21 * lv.rating();
    EXPECT_FALSE(within_trust_region(lv, dp));
}
