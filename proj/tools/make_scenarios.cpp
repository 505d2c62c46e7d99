// Writes the bundled scenarios: a hand-checkable two-node case and a
// synthetic 15-node MV feeder with three LV grids over one day at 10 min.

#include "gridflex/io.hpp"
#include "gridflex/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <string>

using namespace gridflex;

namespace {

constexpr int kSteps = 144;
constexpr double kDt = 10.0;

// mt19937 raw output scaled by hand, so every platform draws the same numbers
struct Draw {
    std::mt19937 gen{20211};
    double uniform(double lo, double hi) { return lo + (hi - lo) * (gen() / 4294967296.0); }
};

double hour_of(int t) { return (t + 0.5) * kDt / 60.0; }

// residential shape: night trough, morning and evening peaks
double household(double h)
{
    const double morning = std::exp(-0.5 * std::pow((h - 7.5) / 1.2, 2));
    const double evening = std::exp(-0.5 * std::pow((h - 19.0) / 2.0, 2));
    return 0.35 + 0.35 * morning + 0.65 * evening;
}

double commercial(double h)
{
    return 0.45 + 0.55 * std::exp(-0.5 * std::pow((h - 13.0) / 3.5, 2));
}

double solar(double h, double cloud)
{
    if (h < 6.0 || h > 20.0)
        return 0.0;
    const double s = std::sin(std::numbers::pi * (h - 6.0) / 14.0);
    return s * s * cloud;
}

OpfScenario feeder15()
{
    Draw draw;
    OpfScenario sc;
    sc.name = "feeder15";
    MvNetwork& mv = sc.mv;
    mv.base_kva = 1000.0;
    mv.base_v = 20000.0;
    mv.slack = "pss";
    mv.nodes.push_back({"pss", 0.95, 1.05});
    for (int i = 1; i <= 14; ++i)
        mv.nodes.push_back({"m" + std::to_string(i), 0.95, 1.05});
    auto cable = [&](const std::string& a, const std::string& b, double km, double imax) {
        mv.branches.push_back({a, b, 0.0008 * km, 0.0006 * km, imax});
    };
    // trunk pss-m1-...-m7, laterals at m2, m3 and m5
    cable("pss", "m1", 2.0, 6.0);
    for (int i = 1; i < 7; ++i)
        cable("m" + std::to_string(i), "m" + std::to_string(i + 1), 1.5, 4.0);
    cable("m2", "m8", 1.2, 2.0);
    cable("m8", "m9", 1.0, 2.0);
    cable("m3", "m10", 1.5, 2.0);
    cable("m10", "m11", 1.0, 2.0);
    cable("m11", "m12", 0.8, 2.0);
    cable("m5", "m13", 1.0, 2.0);
    cable("m13", "m14", 1.2, 2.0);

    const std::vector<std::string> hosts = {"m4", "m9", "m12"};
    for (std::size_t g = 0; g < hosts.size(); ++g) {
        const std::string id = "lv" + std::to_string(g + 1);
        mv.links.push_back({hosts[g], id});
        LvNetwork lv;
        lv.id = id;
        lv.root = "t";
        lv.nodes.push_back({"t", 0.9, 1.1});
        // two feeders a1..a4 and b1..b3, 50-80 m segments of 150 mm2 cable
        for (int i = 1; i <= 4; ++i)
            lv.nodes.push_back({"a" + std::to_string(i), 0.9, 1.1});
        for (int i = 1; i <= 3; ++i)
            lv.nodes.push_back({"b" + std::to_string(i), 0.9, 1.1});
        auto seg = [&](const std::string& a, const std::string& b, double imax) {
            lv.branches.push_back({a, b, draw.uniform(0.05, 0.08), draw.uniform(0.02, 0.03), imax});
        };
        seg("t", "a1", 0.25);
        seg("a1", "a2", 0.2);
        seg("a2", "a3", 0.15);
        seg("a3", "a4", 0.12);
        seg("t", "b1", 0.2);
        seg("b1", "b2", 0.15);
        seg("b2", "b3", 0.12);
        sc.lv.push_back(lv);
    }

    // 10 PV of 20 kWp (10 % curtailable), 12 EV, 3 slow loads
    const char* pv_nodes[] = {"a2", "a4", "b2", "b3", "a3", "a4", "b1", "a2", "a4", "b3"};
    const int pv_grid[] = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
    for (int i = 0; i < 10; ++i) {
        Resource r;
        r.id = "pv" + std::to_string(i + 1);
        r.lv_grid = sc.lv[pv_grid[i]].id;
        r.lv_node = pv_nodes[i];
        r.kind = ResourceKind::PV;
        r.dp_lo_kw = -2.0;
        r.dp_hi_kw = 0.0;
        r.dq_lo_kvar = -6.0;
        r.dq_hi_kvar = 6.0;
        r.s_kva = 22.0;
        r.ramp_kw_per_hr = 120.0;
        sc.resources.push_back(r);
    }
    const char* ev_nodes[] = {"a1", "a3", "b1", "b2", "a1", "a2", "b2", "b3", "a1", "a3", "b1", "b2"};
    for (int i = 0; i < 12; ++i) {
        Resource r;
        r.id = "ev" + std::to_string(i + 1);
        r.lv_grid = sc.lv[i / 4].id;
        r.lv_node = ev_nodes[i];
        r.kind = ResourceKind::EvStorage;
        r.dp_lo_kw = -8.0;
        r.dp_hi_kw = 8.0;
        r.s_kva = 11.0;
        r.ramp_kw_per_hr = 48.0;
        r.eta = 0.95;
        r.cap_kwh = 40.0;
        r.soc_min = 0.1;
        r.soc_max = 0.9;
        r.soc0 = 0.35 + 0.02 * i;
        sc.resources.push_back(r);
    }
    for (int g = 0; g < 3; ++g) {
        Resource r;
        r.id = "hp" + std::to_string(g + 1);
        r.lv_grid = sc.lv[g].id;
        r.lv_node = "a2";
        r.kind = ResourceKind::Load;
        r.dp_lo_kw = -2.0;
        r.dp_hi_kw = 2.0;
        r.s_kva = 10.0;
        r.ramp_kw_per_hr = 3.0;
        sc.resources.push_back(r);
    }

    TimeSeries& ts = sc.ts;
    ts.dt_min = kDt;
    ts.horizon = kSteps;
    std::vector<double> mv_peak(mv.nodes.size()), mv_kind(mv.nodes.size());
    for (std::size_t n = 1; n < mv.nodes.size(); ++n) {
        mv_peak[n] = draw.uniform(80.0, 220.0);
        mv_kind[n] = draw.uniform(0.0, 1.0);
    }
    std::vector<std::vector<double>> lv_peak(3, std::vector<double>(8));
    for (auto& g : lv_peak)
        for (std::size_t n = 1; n < g.size(); ++n)
            g[n] = draw.uniform(3.0, 6.0);
    std::vector<double> cloud(kSteps);
    for (int t = 0; t < kSteps; ++t)
        cloud[t] = 1.0 - 0.25 * std::pow(std::sin(0.37 * t) * std::sin(0.11 * t), 2);
    // EV arrival step and charging duration (baseline charging at 7 kW)
    std::vector<int> arrive(12), dur(12);
    for (int i = 0; i < 12; ++i) {
        arrive[i] = 100 + static_cast<int>(draw.uniform(0.0, 24.0));
        dur[i] = 6 + static_cast<int>(draw.uniform(0.0, 5.0));
    }

    for (int t = 0; t < kSteps; ++t) {
        const double h = hour_of(t);
        std::vector<PQ> mvs(mv.nodes.size());
        for (std::size_t n = 1; n < mv.nodes.size(); ++n) {
            const double shape = mv_kind[n] < 0.7 ? household(h) : commercial(h);
            const double p = -mv_peak[n] * shape;
            mvs[n] = {p, 0.3 * p};
        }
        ts.mv.push_back(mvs);
        std::vector<std::vector<PQ>> lvs;
        for (int g = 0; g < 3; ++g) {
            std::vector<PQ> row(8);
            for (int n = 1; n < 8; ++n) {
                const double p = -lv_peak[g][n] * household(h + 0.3 * g);
                row[n] = {p, 0.25 * p};
            }
            lvs.push_back(row);
        }
        ts.lv.push_back(lvs);
        std::vector<PQ> res;
        for (int i = 0; i < 10; ++i)
            res.push_back({20.0 * solar(h, cloud[t]) * (0.9 + 0.02 * i), 0.0});
        for (int i = 0; i < 12; ++i)
            res.push_back({t >= arrive[i] && t < arrive[i] + dur[i] ? -7.0 : 0.0, 0.0});
        for (int g = 0; g < 3; ++g)
            res.push_back({-3.0 - 1.0 * std::cos(2.0 * std::numbers::pi * h / 24.0), 0.0});
        ts.resource.push_back(res);
    }
    return sc;
}

} // namespace

int main(int argc, char** argv)
{
    const std::filesystem::path root = argc > 1 ? argv[1] : "scenarios";
    try {
        OpfScenario tiny = tiny_scenario();
        save_scenario(tiny, (root / "tiny").string());
        OpfScenario big = feeder15();
        prepare_lv_models(big);
        RunSettings rs;
        rs.envelope_step = 78;  // 13:00
        save_scenario(big, (root / "feeder15").string(), rs);
    } catch (const std::exception& e) {
        std::cerr << "make_scenarios: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << (root / "tiny").string() << " and " << (root / "feeder15").string() << "\n";
    return 0;
}
