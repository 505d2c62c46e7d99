#include "gridflex/cli.hpp"

#include "gridflex/coordination.hpp"
#include "gridflex/csv.hpp"
#include "gridflex/error.hpp"
#include "gridflex/io.hpp"

#include "json.hpp"

#include <filesystem>
#include <ostream>

namespace fs = std::filesystem;

namespace gridflex {

namespace {

void put(const fs::path& dir, const std::string& file, const std::string& text)
{
    csv::write_file_atomic((dir / file).string(), text);
}

EnvelopeOptions envelope_options(const RunSettings& rs)
{
    EnvelopeOptions eo;
    eo.mode = rs.envelope_mode == "horizon" ? EnvelopeMode::Horizon : EnvelopeMode::Step;
    eo.step = rs.envelope_step;
    eo.span = rs.envelope_span;
    return eo;
}

void write_envelopes(const fs::path& dir, const std::string& prefix, const FlexEnvelope& fast,
                     const FlexEnvelope& slow, bool svg)
{
    put(dir, prefix + "_fast.csv", envelope_csv(fast));
    put(dir, prefix + "_slow.csv", envelope_csv(slow));
    if (svg)
        put(dir, prefix + ".svg", envelope_svg(fast, slow));
}

std::string scheme_csv(const CoordinationScheme& s)
{
    std::string out = "order,actor,action\n";
    for (const Process& p : s.processes)
        out += std::to_string(p.order) + "," + to_string(p.actor) + "," + p.action + "\n";
    return out;
}

std::string services_csv()
{
    std::string out = "service,operator,class,available\n";
    for (const ServiceEntry& e : service_catalog())
        out += e.name + "," + to_string(e.requested_by) + "," + to_string(e.speed) + "," +
               (e.available ? "true" : "false") + "\n";
    return out;
}

std::size_t failed(const FlexEnvelope& e) { return e.failures(); }

} // namespace

int run(const RunRequest& req, std::ostream& log, std::ostream& err)
{
    try {
        ScenarioConfig cfg = read_config(req.config);
        if (req.n_dirs)
            cfg.run.n_dirs = *req.n_dirs;
        if (req.scheme) {
            parse_scheme(*req.scheme);
            cfg.run.scheme = *req.scheme;
        }
        if (req.out)
            cfg.run.out = *req.out;
        const fs::path out = req.out ? fs::path(*req.out) : fs::path(cfg.dir) / cfg.run.out;
        if (req.command != "opf" && req.command != "envelope" && req.command != "coordinate" &&
            req.command != "verify")
            throw Error(ErrorCode::InvalidArgument, "unknown command '" + req.command + "'");

        const OpfScenario sc = load_scenario(cfg);
        fs::create_directories(out);
        log << "scenario " << sc.name << ": " << sc.mv.nodes.size() << " MV nodes, " << sc.lv.size()
            << " LV grids, " << sc.resources.size() << " resources, " << sc.ts.horizon << " steps\n";

        if (req.command == "opf") {
            const ScheduleResult res = solve_schedule(sc);
            write_schedule(res, sc, out.string());
            log << "objective " << csv::format(res.objective) << ", max cone gap "
                << csv::format(res.max_relaxation_gap) << ", " << res.iterations << " iterations\n";
            return 0;
        }
        if (req.command == "envelope") {
            CoordinationOptions co{cfg.run.n_dirs, envelope_options(cfg.run)};
            const TsoLeaderResult r = run_tso_leader(sc, co);
            write_envelopes(out, "envelope_" + sc.name, r.fast, r.slow, req.svg);
            log << "fast area " << csv::format(envelope_area(r.fast)) << ", slow area "
                << csv::format(envelope_area(r.slow)) << ", failed directions " << failed(r.fast) + failed(r.slow)
                << "\n";
            return 0;
        }
        if (req.command == "coordinate") {
            CoordinationOptions co{cfg.run.n_dirs, envelope_options(cfg.run)};
            const SchemeKind kind = parse_scheme(cfg.run.scheme);
            put(out, "services.csv", services_csv());
            if (kind == SchemeKind::TsoLeader) {
                const TsoLeaderResult r = run_tso_leader(sc, co);
                put(out, "scheme.csv", scheme_csv(r.scheme));
                write_envelopes(out, "envelope_" + sc.name, r.fast, r.slow, req.svg);
            } else {
                const DsoLeaderResult r = run_dso_leader(sc, co);
                put(out, "scheme.csv", scheme_csv(r.scheme));
                write_schedule(r.schedule, sc, out.string());
                write_envelopes(out, "residual_" + sc.name, r.fast, r.slow, req.svg);
                log << "schedule objective " << csv::format(r.schedule.objective) << "\n";
            }
            log << "scheme " << cfg.run.scheme << " done\n";
            return 0;
        }
        // verify
        const Setpoints sp = read_setpoints(sc, out.string());
        const VerificationReport rep = verify_setpoints(sc, sp, cfg.run.verify_tolerance);
        put(out, "verify.csv", verification_csv(rep));
        if (!rep.ok()) {
            nlohmann::json j;
            j["status"] = "violations";
            j["command"] = req.command;
            j["count"] = rep.violations.size();
            for (const OracleViolation& v : rep.violations)
                j["violations"].push_back(
                    {{"step", v.step}, {"element", v.element}, {"quantity", v.quantity}, {"excess", v.excess}});
            err << j.dump() << "\n";
            return 2;
        }
        log << "verify: no violations beyond " << csv::format(cfg.run.verify_tolerance) << "\n";
        return 0;
    } catch (const Error& e) {
        nlohmann::json j{{"status", "error"}, {"command", req.command}, {"code", std::string(to_string(e.code()))},
                         {"message", e.what()}};
        err << j.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json j{{"status", "error"}, {"command", req.command}, {"code", "Internal"}, {"message", e.what()}};
        err << j.dump() << "\n";
        return 1;
    }
}

} // namespace gridflex
