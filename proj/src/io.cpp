#include "gridflex/io.hpp"

#include "gridflex/coordination.hpp"
#include "gridflex/csv.hpp"
#include "gridflex/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace gridflex {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_error(const std::string& where, const std::string& msg)
{
    throw Error(ErrorCode::ParseError, where + ": " + msg);
}

double to_number(const std::string& s, const std::string& where)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        parse_error(where, "expected a number, got '" + s + "'");
    return v;
}

int to_int(const std::string& s, const std::string& where)
{
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        parse_error(where, "expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s, const std::string& where)
{
    if (s == "true" || s == "1")
        return true;
    if (s == "false" || s == "0")
        return false;
    parse_error(where, "expected true or false, got '" + s + "'");
}

std::string where(const csv::Table& t, std::size_t row, int col)
{
    return t.source + ":" + std::to_string(t.line_of_row[row]) + ":" + std::to_string(col + 1);
}

std::string cell_where(const csv::Table& t, std::size_t row)
{
    return t.source + ":" + std::to_string(t.line_of_row[row]);
}

[[noreturn]] void cross_ref(const csv::Table& t, std::size_t row, const std::string& msg)
{
    throw Error(ErrorCode::CrossRefError, cell_where(t, row) + ": " + msg);
}

std::string resolve(const ScenarioConfig& cfg, const std::string& p, const std::string& key)
{
    if (p.empty())
        throw Error(ErrorCode::ParseError, cfg.path + ": missing key '" + key + "'");
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(cfg.dir) / path).string();
}

csv::Table table(const ScenarioConfig& cfg, const std::string& p, const std::string& key)
{
    return csv::read_file(resolve(cfg, p, key));
}

std::string text_of(const std::function<void(csv::Writer&)>& fill)
{
    std::ostringstream os;
    csv::Writer w(os);
    fill(w);
    return os.str();
}

std::string fmt(double v) { return csv::format(v); }

// shortest text that reads back to the same double, for the hand-edited config
std::string short_fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

ScenarioConfig read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path);
    ScenarioConfig cfg;
    cfg.path = path;
    cfg.dir = fs::path(path).parent_path().string();
    if (cfg.dir.empty())
        cfg.dir = ".";

    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto str = [](std::string& dst) -> Setter { return [&dst](const std::string& v, const std::string&) { dst = v; }; };
    auto num = [](double& dst) -> Setter {
        return [&dst](const std::string& v, const std::string& w) { dst = to_number(v, w); };
    };
    auto integer = [](int& dst) -> Setter {
        return [&dst](const std::string& v, const std::string& w) { dst = to_int(v, w); };
    };
    ObjectiveWeights& W = cfg.weights;
    ScenarioOptions& O = cfg.options;
    RunSettings& R = cfg.run;
    const std::map<std::string, Setter> keys = {
        {"name", str(cfg.name)},
        {"nodes", str(cfg.nodes)},
        {"branches", str(cfg.branches)},
        {"links", str(cfg.links)},
        {"lv_nodes", str(cfg.lv_nodes)},
        {"lv_branches", str(cfg.lv_branches)},
        {"resources", str(cfg.resources)},
        {"timeseries", str(cfg.timeseries)},
        {"slack", str(cfg.slack)},
        {"base_kva", num(cfg.base_kva)},
        {"base_v", num(cfg.base_v)},
        {"dt_min", num(cfg.dt_min)},
        {"horizon", integer(cfg.horizon)},
        {"w_l", num(W.w_l)},
        {"w_v", num(W.w_v)},
        {"w_lim", num(W.w_lim)},
        {"w_p", num(W.w_p)},
        {"w_q", num(W.w_q)},
        {"w_act", num(W.w_act)},
        {"slack_v_min", num(O.slack_v_min)},
        {"slack_v_max", num(O.slack_v_max)},
        {"slack_v_nominal", num(O.slack_v_nominal)},
        {"relaxation_threshold", num(O.relaxation_threshold)},
        {"trust_fraction", num(O.trust_fraction)},
        {"r_thresh", num(O.r_thresh)},
        {"window", integer(O.window)},
        {"feas_tol", num(O.feas_tol)},
        {"gap_tol", num(O.gap_tol)},
        {"transformer_terms", [&O](const std::string& v, const std::string& w) { O.transformer_terms = to_bool(v, w); }},
        {"scheme", [&R](const std::string& v, const std::string&) {
             parse_scheme(v);
             R.scheme = v;
         }},
        {"n_dirs", integer(R.n_dirs)},
        {"out", str(R.out)},
        {"envelope_mode", [&R](const std::string& v, const std::string& w) {
             if (v != "step" && v != "horizon")
                 parse_error(w, "envelope_mode must be step or horizon");
             R.envelope_mode = v;
         }},
        {"envelope_step", integer(R.envelope_step)},
        {"envelope_span", integer(R.envelope_span)},
        {"verify_tolerance", num(R.verify_tolerance)},
    };

    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#')
            continue;
        const std::string w = path + ":" + std::to_string(lineno);
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            parse_error(w, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!seen.insert(key).second)
            parse_error(w, "duplicate key '" + key + "'");
        if (key.rfind("coefficients.", 0) == 0 && key.size() > 13) {
            cfg.coefficients[key.substr(13)] = value;
            continue;
        }
        const auto it = keys.find(key);
        if (it == keys.end())
            parse_error(w, "unknown key '" + key + "'");
        it->second(value, w);
    }
    return cfg;
}

OpfScenario load_scenario(const std::string& config_path) { return load_scenario(read_config(config_path)); }

OpfScenario load_scenario(const ScenarioConfig& cfg)
{
    OpfScenario sc;
    sc.name = cfg.name.empty() ? fs::path(cfg.dir).filename().string() : cfg.name;
    sc.weights = cfg.weights;
    sc.options = cfg.options;
    sc.mv.base_kva = cfg.base_kva;
    sc.mv.base_v = cfg.base_v;

    auto read_nodes = [](const csv::Table& t, std::size_t r, int cid, int cmin, int cmax) {
        return Node{t.cell(r, cid), t.number(r, cmin), t.number(r, cmax)};
    };
    auto read_branch = [](const csv::Table& t, std::size_t r, int cf, int ct, int cr, int cx, int ci) {
        return Branch{t.cell(r, cf), t.cell(r, ct), t.number(r, cr), t.number(r, cx), t.number(r, ci)};
    };

    {
        const csv::Table t = table(cfg, cfg.nodes, "nodes");
        const int cid = t.column("id"), cmin = t.column("vmin"), cmax = t.column("vmax");
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            sc.mv.nodes.push_back(read_nodes(t, r, cid, cmin, cmax));
    }
    sc.mv.slack = cfg.slack.empty() && !sc.mv.nodes.empty() ? sc.mv.nodes.front().id : cfg.slack;
    if (sc.mv.node_index(sc.mv.slack) < 0)
        throw Error(ErrorCode::CrossRefError, cfg.path + ": slack '" + sc.mv.slack + "' is not an MV node");
    {
        const csv::Table t = table(cfg, cfg.branches, "branches");
        const int cf = t.column("from"), ct = t.column("to"), cr = t.column("r_pu"), cx = t.column("x_pu"),
                  ci = t.column("imax_pu");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const Branch b = read_branch(t, r, cf, ct, cr, cx, ci);
            if (sc.mv.node_index(b.from) < 0 || sc.mv.node_index(b.to) < 0)
                cross_ref(t, r, "branch " + b.name() + " references an unknown MV node");
            sc.mv.branches.push_back(b);
        }
    }

    // LV grids in order of first appearance; the first node listed is the transformer secondary
    std::vector<LvNetwork> grids;
    auto grid_of = [&](const std::string& id) -> LvNetwork* {
        for (LvNetwork& g : grids)
            if (g.id == id)
                return &g;
        return nullptr;
    };
    if (!cfg.lv_nodes.empty()) {
        const csv::Table t = table(cfg, cfg.lv_nodes, "lv_nodes");
        const int cg = t.column("lv_grid"), cid = t.column("id"), cmin = t.column("vmin"), cmax = t.column("vmax");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            LvNetwork* g = grid_of(t.cell(r, cg));
            if (!g) {
                grids.push_back({});
                g = &grids.back();
                g->id = t.cell(r, cg);
                g->root = t.cell(r, cid);
            }
            g->nodes.push_back(read_nodes(t, r, cid, cmin, cmax));
        }
    }
    if (!cfg.lv_branches.empty()) {
        const csv::Table t = table(cfg, cfg.lv_branches, "lv_branches");
        const int cg = t.column("lv_grid"), cf = t.column("from"), ct = t.column("to"), cr = t.column("r_pu"),
                  cx = t.column("x_pu"), ci = t.column("imax_pu");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            LvNetwork* g = grid_of(t.cell(r, cg));
            if (!g)
                cross_ref(t, r, "unknown LV grid '" + t.cell(r, cg) + "'");
            const Branch b = read_branch(t, r, cf, ct, cr, cx, ci);
            if (g->node_index(b.from) < 0 || g->node_index(b.to) < 0)
                cross_ref(t, r, "branch " + b.name() + " references an unknown node of " + g->id);
            g->branches.push_back(b);
        }
    }
    {
        const csv::Table t = table(cfg, cfg.links, "links");
        const int cm = t.column("mv_node"), cg = t.column("lv_grid");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const TransformerLink l{t.cell(r, cm), t.cell(r, cg)};
            if (sc.mv.node_index(l.mv_node) < 0)
                cross_ref(t, r, "transformer link to unknown MV node '" + l.mv_node + "'");
            LvNetwork* g = grid_of(l.lv_grid);
            if (!g)
                cross_ref(t, r, "transformer link to nonexistent LV grid '" + l.lv_grid + "'");
            sc.mv.links.push_back(l);
            sc.lv.push_back(*g);
        }
    }
    for (const LvNetwork& g : grids)
        if (sc.lv_index(g.id) < 0)
            throw Error(ErrorCode::CrossRefError, resolve(cfg, cfg.lv_nodes, "lv_nodes") + ": LV grid '" + g.id +
                                                      "' has no transformer link");

    {
        const csv::Table t = table(cfg, cfg.resources, "resources");
        const int cid = t.column("id"), cg = t.column("lv_grid"), cn = t.column("lv_node"), ck = t.column("kind");
        const int cplo = t.column("dp_lo_kw"), cphi = t.column("dp_hi_kw"), cqlo = t.column("dq_lo_kvar"),
                  cqhi = t.column("dq_hi_kvar"), cs = t.column("s_kva"), cramp = t.column("ramp_kw_per_hr");
        const int cpf = t.find_column("pf_lim"), ceta = t.find_column("eta"), ccap = t.find_column("cap_kwh"),
                  cmin = t.find_column("soc_min"), cmax = t.find_column("soc_max"), csoc = t.find_column("soc0");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            Resource x;
            x.id = t.cell(r, cid);
            x.lv_grid = t.cell(r, cg);
            x.lv_node = t.cell(r, cn);
            try {
                x.kind = parse_resource_kind(t.cell(r, ck));
            } catch (const Error& e) {
                parse_error(where(t, r, ck), e.what());
            }
            // EVs default to the 8 kW charger limits
            const double p_default = x.is_storage() ? 8.0 : 0.0;
            x.dp_lo_kw = t.number_or(r, cplo, -p_default);
            x.dp_hi_kw = t.number_or(r, cphi, p_default);
            x.dq_lo_kvar = t.number_or(r, cqlo, 0.0);
            x.dq_hi_kvar = t.number_or(r, cqhi, 0.0);
            x.s_kva = t.number(r, cs);
            x.ramp_kw_per_hr = t.number(r, cramp);
            x.pf_lim = t.number_or(r, cpf, 0.95);
            x.eta = t.number_or(r, ceta, 1.0);
            x.cap_kwh = t.number_or(r, ccap, 0.0);
            x.soc_min = t.number_or(r, cmin, 0.1);
            x.soc_max = t.number_or(r, cmax, 0.9);
            x.soc0 = t.number_or(r, csoc, 0.5);
            const int g = sc.lv_index(x.lv_grid);
            if (g < 0)
                cross_ref(t, r, "resource " + x.id + " on unknown LV grid '" + x.lv_grid + "'");
            if (sc.lv[g].node_index(x.lv_node) < 0)
                cross_ref(t, r, "resource " + x.id + " on unknown node '" + x.lv_node + "' of " + x.lv_grid);
            sc.resources.push_back(x);
        }
    }

    {
        const csv::Table t = table(cfg, cfg.timeseries, "timeseries");
        const int ct = t.column("t"), ce = t.column("element_id"), cp = t.column("p_kw"), cq = t.column("q_kvar");
        int horizon = cfg.horizon;
        std::vector<int> steps(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            steps[r] = to_int(t.cell(r, ct), where(t, r, ct));
            if (steps[r] < 0)
                parse_error(where(t, r, ct), "step must be >= 0");
            if (cfg.horizon <= 0)
                horizon = std::max(horizon, steps[r] + 1);
            else if (steps[r] >= cfg.horizon)
                parse_error(where(t, r, ct), "step outside the configured horizon");
        }
        TimeSeries& ts = sc.ts;
        ts.dt_min = cfg.dt_min;
        ts.horizon = horizon;
        ts.mv.assign(horizon, std::vector<PQ>(sc.mv.nodes.size()));
        ts.lv.assign(horizon, {});
        for (auto& step : ts.lv)
            for (const LvNetwork& g : sc.lv)
                step.emplace_back(g.nodes.size());
        ts.resource.assign(horizon, std::vector<PQ>(sc.resources.size()));
        std::vector<PQ> schedule(horizon);
        bool has_schedule = false;
        std::set<std::pair<int, std::string>> seen;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string& id = t.cell(r, ce);
            const int s = steps[r];
            if (!seen.insert({s, id}).second)
                parse_error(cell_where(t, r), "duplicate entry for " + id + " at step " + std::to_string(s));
            const PQ v{t.number(r, cp), t.number(r, cq)};
            if (id == "tso_schedule") {
                schedule[s] = v;
                has_schedule = true;
            } else if (const int n = sc.mv.node_index(id); n >= 0) {
                ts.mv[s][n] = v;
            } else if (const int k = sc.resource_index(id); k >= 0) {
                ts.resource[s][k] = v;
            } else if (const auto c = id.find(':'); c != std::string::npos) {
                const int g = sc.lv_index(id.substr(0, c));
                const int n = g < 0 ? -1 : sc.lv[g].node_index(id.substr(c + 1));
                if (n < 0)
                    cross_ref(t, r, "unknown LV node '" + id + "'");
                ts.lv[s][g][n] = v;
            } else {
                cross_ref(t, r, "unknown element '" + id + "'");
            }
        }
        if (has_schedule)
            ts.tso_schedule = std::move(schedule);
    }

    sc.fixed_coefficients.assign(sc.lv.size(), std::nullopt);
    for (const auto& [grid, p] : cfg.coefficients) {
        const int g = sc.lv_index(grid);
        if (g < 0)
            throw Error(ErrorCode::CrossRefError, cfg.path + ": coefficients for unknown LV grid '" + grid + "'");
        const std::string path = resolve(cfg, p, "coefficients." + grid);
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot open " + path);
        sc.fixed_coefficients[g] = read_coefficients(in, LvLayout::of(sc.lv[g]), path);
    }
    if (cfg.coefficients.empty())
        sc.fixed_coefficients.clear();

    const auto defects = check_scenario(sc);
    if (!defects.empty()) {
        std::string msg = cfg.path + ": " + std::to_string(defects.size()) + " validation error(s)";
        for (const ScenarioDefect& d : defects)
            msg += "\n  " + d.element + ": " + d.message;
        throw Error(ErrorCode::ValidationError, msg);
    }
    prepare_lv_models(sc);
    return sc;
}

void save_scenario(const OpfScenario& sc, const std::string& dir, const RunSettings& run)
{
    fs::create_directories(dir);
    auto put = [&](const std::string& file, const std::function<void(csv::Writer&)>& fill) {
        csv::write_file_atomic((fs::path(dir) / file).string(), text_of(fill));
    };
    put("nodes.csv", [&](csv::Writer& w) {
        w.row({"id", "vmin", "vmax"});
        for (const Node& n : sc.mv.nodes)
            w.row({n.id, fmt(n.vmin), fmt(n.vmax)});
    });
    put("branches.csv", [&](csv::Writer& w) {
        w.row({"from", "to", "r_pu", "x_pu", "imax_pu"});
        for (const Branch& b : sc.mv.branches)
            w.row({b.from, b.to, fmt(b.r), fmt(b.x), fmt(b.imax)});
    });
    put("links.csv", [&](csv::Writer& w) {
        w.row({"mv_node", "lv_grid"});
        for (const TransformerLink& l : sc.mv.links)
            w.row({l.mv_node, l.lv_grid});
    });
    put("lv_nodes.csv", [&](csv::Writer& w) {
        w.row({"lv_grid", "id", "vmin", "vmax"});
        for (const LvNetwork& g : sc.lv) {
            // the secondary goes first
            const int root = g.node_index(g.root);
            if (root >= 0)
                w.row({g.id, g.nodes[root].id, fmt(g.nodes[root].vmin), fmt(g.nodes[root].vmax)});
            for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
                if (i != root)
                    w.row({g.id, g.nodes[i].id, fmt(g.nodes[i].vmin), fmt(g.nodes[i].vmax)});
        }
    });
    put("lv_branches.csv", [&](csv::Writer& w) {
        w.row({"lv_grid", "from", "to", "r_pu", "x_pu", "imax_pu"});
        for (const LvNetwork& g : sc.lv)
            for (const Branch& b : g.branches)
                w.row({g.id, b.from, b.to, fmt(b.r), fmt(b.x), fmt(b.imax)});
    });
    put("resources.csv", [&](csv::Writer& w) {
        w.row({"id", "lv_grid", "lv_node", "kind", "dp_lo_kw", "dp_hi_kw", "dq_lo_kvar", "dq_hi_kvar", "s_kva",
               "pf_lim", "ramp_kw_per_hr", "eta", "cap_kwh", "soc_min", "soc_max", "soc0"});
        for (const Resource& r : sc.resources)
            w.row({r.id, r.lv_grid, r.lv_node, to_string(r.kind), fmt(r.dp_lo_kw), fmt(r.dp_hi_kw),
                   fmt(r.dq_lo_kvar), fmt(r.dq_hi_kvar), fmt(r.s_kva), fmt(r.pf_lim), fmt(r.ramp_kw_per_hr),
                   fmt(r.eta), fmt(r.cap_kwh), fmt(r.soc_min), fmt(r.soc_max), fmt(r.soc0)});
    });
    put("timeseries.csv", [&](csv::Writer& w) {
        const TimeSeries& ts = sc.ts;
        w.row({"t", "element_id", "p_kw", "q_kvar"});
        for (int t = 0; t < ts.horizon; ++t) {
            const std::string s = std::to_string(t);
            for (std::size_t n = 0; n < sc.mv.nodes.size(); ++n)
                w.row({s, sc.mv.nodes[n].id, fmt(ts.mv[t][n].p), fmt(ts.mv[t][n].q)});
            for (std::size_t g = 0; g < sc.lv.size(); ++g)
                for (std::size_t n = 0; n < sc.lv[g].nodes.size(); ++n)
                    if (ts.lv[t][g][n].p != 0.0 || ts.lv[t][g][n].q != 0.0)
                        w.row({s, sc.lv[g].id + ":" + sc.lv[g].nodes[n].id, fmt(ts.lv[t][g][n].p),
                               fmt(ts.lv[t][g][n].q)});
            for (std::size_t k = 0; k < sc.resources.size(); ++k)
                w.row({s, sc.resources[k].id, fmt(ts.resource[t][k].p), fmt(ts.resource[t][k].q)});
            if (!ts.tso_schedule.empty())
                w.row({s, "tso_schedule", fmt(ts.tso_schedule[t].p), fmt(ts.tso_schedule[t].q)});
        }
    });

    std::ostringstream cfg;
    const ObjectiveWeights& W = sc.weights;
    const ScenarioOptions& O = sc.options;
    cfg << "# gridflex scenario\n"
        << "name = " << sc.name << "\n"
        << "nodes = nodes.csv\nbranches = branches.csv\nlinks = links.csv\n"
        << "lv_nodes = lv_nodes.csv\nlv_branches = lv_branches.csv\n"
        << "resources = resources.csv\ntimeseries = timeseries.csv\n";
    for (std::size_t g = 0; g < sc.fixed_coefficients.size() && g < sc.lv.size(); ++g) {
        if (!sc.fixed_coefficients[g])
            continue;
        const std::string file = "coefficients_" + sc.lv[g].id + ".csv";
        std::ostringstream os;
        write_coefficients(os, *sc.fixed_coefficients[g]);
        csv::write_file_atomic((fs::path(dir) / file).string(), os.str());
        cfg << "coefficients." << sc.lv[g].id << " = " << file << "\n";
    }
    cfg << "slack = " << sc.mv.slack << "\n"
        << "base_kva = " << short_fmt(sc.mv.base_kva) << "\nbase_v = " << short_fmt(sc.mv.base_v) << "\n"
        << "dt_min = " << short_fmt(sc.ts.dt_min) << "\nhorizon = " << sc.ts.horizon << "\n\n"
        << "w_l = " << short_fmt(W.w_l) << "\nw_v = " << short_fmt(W.w_v) << "\nw_lim = " << short_fmt(W.w_lim) << "\n"
        << "w_p = " << short_fmt(W.w_p) << "\nw_q = " << short_fmt(W.w_q) << "\nw_act = " << short_fmt(W.w_act) << "\n\n"
        << "slack_v_min = " << short_fmt(O.slack_v_min) << "\nslack_v_max = " << short_fmt(O.slack_v_max) << "\n"
        << "slack_v_nominal = " << short_fmt(O.slack_v_nominal) << "\n"
        << "relaxation_threshold = " << short_fmt(O.relaxation_threshold) << "\n"
        << "trust_fraction = " << short_fmt(O.trust_fraction) << "\nr_thresh = " << short_fmt(O.r_thresh) << "\n"
        << "window = " << O.window << "\nfeas_tol = " << short_fmt(O.feas_tol) << "\ngap_tol = " << short_fmt(O.gap_tol) << "\n"
        << "transformer_terms = " << (O.transformer_terms ? "true" : "false") << "\n\n"
        << "scheme = " << run.scheme << "\nn_dirs = " << run.n_dirs << "\nout = " << run.out << "\n"
        << "envelope_mode = " << run.envelope_mode << "\nenvelope_step = " << run.envelope_step << "\n"
        << "envelope_span = " << run.envelope_span << "\nverify_tolerance = " << short_fmt(run.verify_tolerance) << "\n";
    csv::write_file_atomic((fs::path(dir) / "scenario.cfg").string(), cfg.str());
}

std::string scenario_difference(const OpfScenario& a, const OpfScenario& b)
{
    if (a.name != b.name)
        return "name";
    if (!(a.mv == b.mv))
        return "mv";
    if (a.lv != b.lv)
        return "lv";
    if (a.resources != b.resources)
        return "resources";
    if (!(a.ts == b.ts))
        return "ts";
    if (!(a.weights == b.weights))
        return "weights";
    if (!(a.options == b.options))
        return "options";
    if (a.step_boxes != b.step_boxes)
        return "step_boxes";
    auto coeff_text = [](const OpfScenario& s) {
        std::vector<std::string> out;
        for (const auto& m : s.fixed_coefficients) {
            std::ostringstream os;
            if (m)
                write_coefficients(os, *m);
            out.push_back(os.str());
        }
        while (!out.empty() && out.back().empty())
            out.pop_back();
        return out;
    };
    if (coeff_text(a) != coeff_text(b))
        return "fixed_coefficients";
    return "";
}

void write_schedule(const ScheduleResult& res, const OpfScenario& sc, const std::string& dir)
{
    fs::create_directories(dir);
    auto put = [&](const std::string& file, const std::function<void(csv::Writer&)>& fill) {
        csv::write_file_atomic((fs::path(dir) / file).string(), text_of(fill));
    };
    const double base = sc.base();
    put("setpoints.csv", [&](csv::Writer& w) {
        w.row({"t", "resource_id", "dp_kw", "dq_kvar", "p_kw", "q_kvar", "soc"});
        for (std::size_t t = 0; t < res.steps.size(); ++t)
            for (std::size_t k = 0; k < sc.resources.size(); ++k) {
                const PQ& d = res.steps[t].delta[k];
                const PQ& b = sc.ts.resource[t][k];
                const double soc = res.steps[t].soc[k];
                w.row({std::to_string(t), sc.resources[k].id, fmt(d.p), fmt(d.q), fmt(b.p + d.p), fmt(b.q + d.q),
                       std::isnan(soc) ? "" : fmt(soc)});
            }
    });
    put("slack.csv", [&](csv::Writer& w) {
        w.row({"t", "v_sq", "p_import_kw", "q_import_kvar"});
        for (std::size_t t = 0; t < res.steps.size(); ++t) {
            const StepResult& s = res.steps[t];
            w.row({std::to_string(t), fmt(s.slack_v), fmt(s.mv.p_slack * base), fmt(s.mv.q_slack * base)});
        }
    });
    put("mv_nodes.csv", [&](csv::Writer& w) {
        w.row({"t", "node", "v_sq", "v_pu", "v_dev"});
        for (std::size_t t = 0; t < res.steps.size(); ++t)
            for (std::size_t n = 0; n < sc.mv.nodes.size(); ++n) {
                const StepResult& s = res.steps[t];
                w.row({std::to_string(t), sc.mv.nodes[n].id, fmt(s.mv.v[n]), fmt(std::sqrt(s.mv.v[n])),
                       fmt(s.v_dev[n])});
            }
    });
    put("mv_branches.csv", [&](csv::Writer& w) {
        w.row({"t", "branch", "p_pu", "q_pu", "l_pu", "l_dev", "cone_gap"});
        for (std::size_t t = 0; t < res.steps.size(); ++t) {
            const StepResult& s = res.steps[t];
            const RadialTopology topo = build_topology(sc.mv.nodes, sc.mv.branches, sc.mv.slack);
            for (std::size_t b = 0; b < sc.mv.branches.size(); ++b) {
                const double gap = s.mv.v[topo.upstream[b]] * s.mv.l[b] - s.mv.P[b] * s.mv.P[b] - s.mv.Q[b] * s.mv.Q[b];
                w.row({std::to_string(t), sc.mv.branches[b].name(), fmt(s.mv.P[b]), fmt(s.mv.Q[b]), fmt(s.mv.l[b]),
                       fmt(s.l_dev[b]), fmt(gap)});
            }
        }
    });
    put("lv_state.csv", [&](csv::Writer& w) {
        w.row({"t", "lv_grid", "element", "quantity", "value", "lo", "hi"});
        for (std::size_t t = 0; t < res.steps.size(); ++t)
            for (std::size_t g = 0; g < sc.lv.size(); ++g) {
                const LvState& st = res.steps[t].lv[g];
                const LvLayout& L = sc.lv_models[g].models[t].layout;
                for (std::size_t i = 0; i < L.nodes.size(); ++i) {
                    const Node& n = sc.lv[g].nodes[sc.lv[g].node_index(L.nodes[i])];
                    w.row({std::to_string(t), sc.lv[g].id, n.id, "V", fmt(st.V[i]), fmt(n.vmin), fmt(n.vmax)});
                }
                for (std::size_t i = 0; i < L.branches.size() && i < st.I.size(); ++i) {
                    const Branch& b = sc.lv[g].branches[sc.lv[g].branch_index(L.branches[i])];
                    w.row({std::to_string(t), sc.lv[g].id, b.name(), "I", fmt(st.I[i]), "0", fmt(b.imax)});
                }
            }
    });
    put("breakdown.csv", [&](csv::Writer& w) {
        w.row({"term", "raw", "weighted"});
        const ObjectiveTerms& r = res.raw;
        const ObjectiveTerms& x = res.weighted;
        w.row({"losses", fmt(r.losses), fmt(x.losses)});
        w.row({"voltage", fmt(r.voltage), fmt(x.voltage)});
        w.row({"flow", fmt(r.flow), fmt(x.flow)});
        w.row({"p_dev", fmt(r.p_dev), fmt(x.p_dev)});
        w.row({"q_dev", fmt(r.q_dev), fmt(x.q_dev)});
        w.row({"activation", fmt(r.activation), fmt(x.activation)});
        w.row({"total", fmt(r.total()), fmt(x.total())});
    });
}

Setpoints read_setpoints(const OpfScenario& sc, const std::string& dir)
{
    Setpoints sp = Setpoints::zero(sc);
    const csv::Table t = csv::read_file((fs::path(dir) / "setpoints.csv").string());
    const int ct = t.column("t"), cr = t.column("resource_id"), cp = t.column("dp_kw"), cq = t.column("dq_kvar");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int s = to_int(t.cell(r, ct), where(t, r, ct));
        if (s < 0 || s >= sc.ts.horizon)
            parse_error(where(t, r, ct), "step outside the horizon");
        const int k = sc.resource_index(t.cell(r, cr));
        if (k < 0)
            cross_ref(t, r, "unknown resource '" + t.cell(r, cr) + "'");
        sp.delta[s][k] = {t.number(r, cp), t.number(r, cq)};
    }
    const fs::path slack = fs::path(dir) / "slack.csv";
    if (fs::exists(slack)) {
        const csv::Table u = csv::read_file(slack.string());
        const int ct2 = u.column("t"), cv = u.column("v_sq");
        for (std::size_t r = 0; r < u.rows.size(); ++r) {
            const int s = to_int(u.cell(r, ct2), where(u, r, ct2));
            if (s < 0 || s >= sc.ts.horizon)
                parse_error(where(u, r, ct2), "step outside the horizon");
            sp.slack_v[s] = u.number(r, cv);
        }
    }
    return sp;
}

std::string envelope_csv(const FlexEnvelope& env)
{
    return text_of([&](csv::Writer& w) {
        const std::string label = to_string(env.service.label);
        w.row({"service_class", "theta_rad", "dp_kw", "dq_kvar", "status"});
        for (const EnvelopePoint& p : env.points)
            w.row({label, fmt(p.theta), p.ok ? fmt(p.dp_kw) : "", p.ok ? fmt(p.dq_kvar) : "", p.status});
    });
}

std::string envelope_svg(const FlexEnvelope& fast, const FlexEnvelope& slow)
{
    double lim = 1.0;
    for (const FlexEnvelope* e : {&fast, &slow})
        for (const EnvelopePoint& p : e->points)
            if (p.ok)
                lim = std::max({lim, std::abs(p.dp_kw), std::abs(p.dq_kvar)});
    lim *= 1.1;
    const double size = 480.0, half = size / 2.0;
    auto x = [&](double dp) { return half + dp / lim * (half - 20.0); };
    auto y = [&](double dq) { return half - dq / lim * (half - 20.0); };
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 "
       << size << " " << size << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<line x1=\"0\" y1=\"" << half << "\" x2=\"" << size << "\" y2=\"" << half << "\" stroke=\"#999\"/>\n"
       << "<line x1=\"" << half << "\" y1=\"0\" x2=\"" << half << "\" y2=\"" << size << "\" stroke=\"#999\"/>\n";
    auto poly = [&](const FlexEnvelope& e, const char* color) {
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"" << color << "\" points=\"";
        for (const EnvelopePoint& p : e.points)
            if (p.ok)
                os << x(p.dp_kw) << "," << y(p.dq_kvar) << " ";
        os << "\"/>\n";
    };
    poly(slow, "#1f77b4");
    poly(fast, "#d62728");
    os << "<text x=\"8\" y=\"16\" font-size=\"12\">slow (blue), fast (red); axis range +/-" << lim
       << " kW / kvar around the baseline</text>\n"
       << "<text x=\"" << size - 60 << "\" y=\"" << half - 4 << "\" font-size=\"12\">dP</text>\n"
       << "<text x=\"" << half + 4 << "\" y=\"14\" font-size=\"12\">dQ</text>\n"
       << "</svg>\n";
    return os.str();
}

std::string verification_csv(const VerificationReport& rep)
{
    return text_of([&](csv::Writer& w) {
        w.row({"step", "element", "quantity", "value", "limit", "excess"});
        for (const OracleViolation& v : rep.violations)
            w.row({std::to_string(v.step), v.element, v.quantity, fmt(v.value), fmt(v.limit), fmt(v.excess)});
    });
}

} // namespace gridflex
