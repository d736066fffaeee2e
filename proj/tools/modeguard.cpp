#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "modeguard/callgraph.hpp"
#include "modeguard/evaluation.hpp"
#include "modeguard/instrument.hpp"
#include "modeguard/missiongen.hpp"
#include "modeguard/modeanalysis.hpp"
#include "modeguard/pipeline.hpp"
#include "modeguard/pointsto.hpp"

using namespace modeguard;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string out;
    std::string format = "text";
    bool machine() const { return format == "machine"; }
};

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FileFormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to --out when given, stdout otherwise.
void emit(const Globals& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(g.out, std::ios::binary);
    if (!os)
        throw FileFormatError("cannot write '" + g.out + "'");
    os << text;
}

std::set<std::string> split_list(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty())
            out.insert(item);
    return out;
}

ModeEntryMap entries_for(const FirmwareModule& m, const std::string& regex, std::vector<std::string>* warnings) {
    EntryPattern pattern;
    if (!regex.empty())
        pattern.regex_template = regex;
    const FirmwareModule& profiled = m.is_instrumented() ? m : instrument_profile(m);
    return detect_mode_entries(m, run_mission(profiled, all_modes_mission(m)), pattern, warnings);
}

ModeConfig static_config_for(const FirmwareModule& m, const std::string& id, const CallGraph& pruned,
                             std::vector<std::string>* warnings) {
    return static_reachable(pruned, m, entries_for(m, "", warnings), {m.entry}, id);
}

std::string fmt_pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v * 100.0;
    return os.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"modeguard: per-mode firmware debloating and enforcement"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for mission generation");
    app.add_option("--out", g.out, "Output file or directory");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "machine"}));

    std::string fir;
    std::vector<std::string> warnings;
    int code = kExitOk;

    // pts
    bool dump = false;
    auto* pts = app.add_subcommand("pts", "Points-to analysis")->fallthrough();
    pts->add_option("firmware", fir)->required();
    pts->add_flag("--dump", dump, "Print every non-empty points-to set");
    pts->callback([&] {
        FirmwareModule m = load_firmware(fir);
        PointsToResult r = solve_andersen(m);
        if (dump) {
            emit(g, dump_points_to(r));
            return;
        }
        std::ostringstream os;
        if (g.machine())
            os << "locations=" << r.pts.size() << " iterations=" << r.iterations << " bound=" << r.iteration_bound
               << '\n';
        else
            os << r.pts.size() << " locations with targets, " << r.iterations << " worklist pops (bound "
               << r.iteration_bound << ")\n";
        emit(g, os.str());
    });

    // callgraph
    std::string prune = "sig+addr";
    std::string dot;
    bool stats = false;
    bool single_pass = false;
    auto* cgc = app.add_subcommand("callgraph", "Build and prune the call graph")->fallthrough();
    cgc->add_option("firmware", fir)->required();
    cgc->add_option("--prune", prune)->check(CLI::IsMember({"none", "sig", "sig+addr"}));
    cgc->add_option("--dot", dot, "Write the selected graph as DOT");
    cgc->add_flag("--stats", stats, "Print edge counts and precision");
    cgc->add_flag("--single-pass", single_pass, "Address-taken pruning without iterating to a fixpoint");
    cgc->callback([&] {
        FirmwareModule m = load_firmware(fir);
        CallGraphStages s;
        s.original = build_callgraph(m, solve_andersen(m));
        s.signature = prune_signature(s.original, m);
        std::size_t rounds = 0;
        s.address = prune_address_taken(s.signature, m,
                                        single_pass ? AddressPruning::SinglePass : AddressPruning::Fixpoint, &rounds);
        const CallGraph& chosen = prune == "none" ? s.original : prune == "sig" ? s.signature : s.address;
        if (!dot.empty()) {
            std::ofstream os(dot, std::ios::binary);
            if (!os)
                throw FileFormatError("cannot write '" + dot + "'");
            os << to_dot(chosen);
        }
        std::ostringstream os;
        if (stats || dot.empty())
            os << format_callgraph_stats(s) << '\n';
        if (!g.machine() && (stats || dot.empty()))
            os << "address pruning rounds: " << rounds << '\n';
        emit(g, os.str());
    });

    // reach
    std::string roots;
    std::string entry_regex;
    bool annotated = false;
    auto* reach = app.add_subcommand("reach", "Per-mode static reachable sets")->fallthrough();
    reach->add_option("firmware", fir)->required();
    reach->add_option("--roots", roots, "Always-reachable roots, comma separated (default: the entry)");
    reach->add_option("--entry-regex", entry_regex, "Entry name template, {mode} is the lower-cased mode");
    reach->add_flag("--annotated", annotated, "Take entries from @entry comments instead of a trace");
    reach->callback([&] {
        FirmwareModule m = load_firmware(fir);
        ModeEntryMap entries = annotated ? annotated_entries(read_text(fir)) : entries_for(m, entry_regex, &warnings);
        std::set<std::string> root_set = roots.empty() ? std::set<std::string>{m.entry} : split_list(roots);
        ModeConfig c = static_reachable(analyze_callgraph(m).address, m, entries, root_set, firmware_id_from_path(fir));
        emit(g, serialize_mode_config(c));
        for (const auto& [mode, fns] : entries.entries)
            for (const auto& f : fns)
                std::cerr << "entry " << mode << ' ' << f << '\n';
    });

    // instrument
    std::string inst_mode;
    auto* inst = app.add_subcommand("instrument", "Insert profiling or guard instrumentation")->fallthrough();
    inst->add_option("firmware", fir)->required();
    inst->add_option("--mode", inst_mode)->required()->check(CLI::IsMember({"profile", "guard"}));
    inst->callback([&] {
        FirmwareModule m = load_firmware(fir);
        emit(g, serialize_firmware(inst_mode == "profile" ? instrument_profile(m) : instrument_guard(m)));
    });

    // profile
    std::string missions_dir;
    std::size_t k = 0;
    auto* prof = app.add_subcommand("profile", "Build a dynamic config from profiling missions")->fallthrough();
    prof->add_option("firmware", fir)->required();
    prof->add_option("--missions", missions_dir)->required();
    prof->add_option("--k", k, "Use only the first K missions (default: all)");
    prof->callback([&] {
        FirmwareModule m = load_firmware(fir);
        std::string id = firmware_id_from_path(fir);
        CallGraph pruned = analyze_callgraph(m).address;
        ModeConfig st = static_config_for(m, id, pruned, &warnings);
        FirmwareModule profiled = instrument_profile(m);
        std::vector<MissionScript> missions = load_missions(missions_dir);
        if (k && k < missions.size())
            missions.resize(k);
        std::vector<ProfileLog> logs;
        for (const auto& ms : missions)
            logs.push_back(run_mission(profiled, ms).per_mode_executed);
        emit(g, serialize_mode_config(dynamic_config(logs, m, &st, failsafe_core(m, pruned), id, &warnings)));
    });

    // run
    std::string mission_file;
    std::string config_file;
    bool enforce = false;
    bool permit_all = false;
    bool events = false;
    auto* run = app.add_subcommand("run", "Run one mission")->fallthrough();
    run->add_option("firmware", fir)->required();
    run->add_option("--mission", mission_file)->required();
    run->add_option("--config", config_file);
    auto* enf = run->add_flag("--enforce", enforce, "Enforce the config");
    run->add_flag("--permit-all", permit_all, "Monitor without blocking")->excludes(enf);
    run->add_flag("--events", events, "Include the monitor event log");
    run->callback([&] {
        FirmwareModule m = load_firmware(fir);
        RunOptions opt;
        opt.record_events = events;
        opt.monitor = enforce ? MonitorMode::Enforce : permit_all ? MonitorMode::PermitAll : MonitorMode::Off;
        std::optional<ModeConfig> cfg;
        if (!config_file.empty())
            cfg = load_mode_config(config_file, &m);
        opt.config = cfg ? &*cfg : nullptr;
        if (opt.monitor != MonitorMode::Off && !m.is_instrumented())
            m = instrument_guard(m);
        RunReport r = run_mission(m, load_mission(mission_file), opt);
        std::string text = g.machine() ? r.to_machine() : r.to_text();
        for (const auto& e : r.events)
            text += "event " + e + "\n";
        emit(g, text);
    });

    // attack
    std::string scenario;
    auto* att = app.add_subcommand("attack", "Replay a control-flow hijack scenario")->fallthrough();
    att->add_option("firmware", fir)->required();
    att->add_option("--scenario", scenario)->required()->check(CLI::IsMember({"a1", "a2", "a3"}));
    att->add_option("--config", config_file)->required();
    att->callback([&] {
        FirmwareModule m = load_firmware(fir);
        ModeConfig cfg = load_mode_config(config_file, &m);
        auto sc = attack_scenario(m, scenario);
        if (!sc)
            throw UsageError("scenario " + scenario + " does not apply to this firmware");
        AttackOutcome o = run_attack(m, instrument_guard(m), *sc, cfg);
        std::ostringstream os;
        if (g.machine()) {
            os << "attack=" << o.scenario << " effect_without_monitor=" << o.effect_without_monitor
               << " forbidden_calls=" << o.forbidden_calls << " failsafe=" << o.fail_safe
               << " effect_under_enforce=" << o.effect_under_enforce << " detected=" << o.detected() << '\n';
        } else {
            os << "scenario " << o.scenario << ": hijack into " << sc->target << " while in " << sc->mode << '\n'
               << "  monitor off:  '" << sc->forbidden_effect << "' " << (o.effect_without_monitor ? "fired" : "did not fire")
               << '\n'
               << "  enforced:     " << o.forbidden_calls << " forbidden call(s), fail-safe "
               << (o.fail_safe ? "triggered" : "not triggered") << ", '" << sc->forbidden_effect << "' "
               << (o.effect_under_enforce ? "fired" : "blocked") << '\n'
               << "  " << (o.detected() ? "DETECTED" : "NOT DETECTED") << '\n';
        }
        emit(g, os.str());
        if (!o.detected())
            code = kExitEnforcement;
    });

    // metrics
    std::string static_cfg, dynamic_cfg;
    std::vector<std::size_t> prec_args, red_args;
    bool table = false;
    auto* met = app.add_subcommand("metrics", "Precision, reduction and per-mode tables")->fallthrough();
    met->add_option("--firmware", fir);
    met->add_option("--static", static_cfg);
    met->add_option("--dynamic", dynamic_cfg);
    met->add_flag("--table", table, "Print the per-mode reduction table");
    met->add_option("--precision", prec_args, "ORIGINAL PRUNED")->expected(2);
    met->add_option("--reduction", red_args, "TOTAL ALLOWED")->expected(2);
    met->callback([&] {
        std::ostringstream os;
        if (prec_args.size() == 2)
            os << "precision=" << fmt_pct(precision(prec_args[0], prec_args[1])) << "%\n";
        if (red_args.size() == 2)
            os << "reduction=" << fmt_pct(reduction(red_args[0], red_args[1])) << "%\n";
        if (table || !static_cfg.empty() || !dynamic_cfg.empty()) {
            if (fir.empty() || static_cfg.empty() || dynamic_cfg.empty())
                throw UsageError("--table needs --firmware, --static and --dynamic");
            FirmwareModule m = load_firmware(fir);
            ModeConfig s = load_mode_config(static_cfg, &m);
            ModeConfig d = load_mode_config(dynamic_cfg, &m);
            std::size_t total = m.functions.size();
            if (!g.machine())
                os << std::left << std::setw(10) << "mode" << std::right << std::setw(9) << "dynamic" << std::setw(12)
                   << "red.dyn %" << std::setw(9) << "static" << std::setw(14) << "red.static %" << std::setw(8)
                   << "total" << '\n';
            for (const auto& mode : m.mode_names) {
                std::size_t dc = d.per_mode.at(mode).size(), sc = s.per_mode.at(mode).size();
                if (g.machine())
                    os << "mode=" << mode << " dynamic=" << dc << " static=" << sc << " total=" << total
                       << " reduction_dynamic=" << fmt_pct(reduction(total, dc))
                       << " reduction_static=" << fmt_pct(reduction(total, sc)) << '\n';
                else
                    os << std::left << std::setw(10) << mode << std::right << std::setw(9) << dc << std::setw(12)
                       << fmt_pct(reduction(total, dc)) << std::setw(9) << sc << std::setw(14)
                       << fmt_pct(reduction(total, sc)) << std::setw(8) << total << '\n';
            }
        }
        if (os.str().empty())
            throw UsageError("metrics needs --precision, --reduction or --table");
        emit(g, os.str());
    });

    // pipeline
    std::string scenarios = "a1,a2,a3";
    std::size_t profile_k = 10;
    auto* pipe = app.add_subcommand("pipeline", "Run every phase end to end")->fallthrough();
    pipe->add_option("firmware", fir)->required();
    pipe->add_option("--missions", missions_dir, "Mission directory (default: generate 40)");
    pipe->add_option("--scenarios", scenarios);
    pipe->add_option("--k", profile_k, "Missions used for the dynamic config");
    pipe->add_flag("--permit-all", permit_all, "Skip enforcement");
    pipe->callback([&] {
        PipelineOptions opt;
        opt.missions_dir = missions_dir;
        opt.out_dir = g.out;
        opt.seed = g.seed;
        opt.profile_k = profile_k;
        opt.permit_all = permit_all;
        auto list = split_list(scenarios);
        opt.scenarios.assign(list.begin(), list.end());
        PipelineReport r = cmd_pipeline(fir, opt);
        std::cout << (g.machine() ? r.to_machine() : r.to_text());
        code = r.exit_code;
    });

    // gen-missions
    std::size_t count = 40;
    std::string prefix = "m";
    auto* gen = app.add_subcommand("gen-missions", "Generate a benign mission corpus")->fallthrough();
    gen->add_option("firmware", fir)->required();
    gen->add_option("--count", count);
    gen->add_option("--prefix", prefix);
    gen->callback([&] {
        if (g.out.empty())
            throw UsageError("gen-missions needs --out DIR");
        FirmwareModule m = load_firmware(fir);
        auto paths = write_missions(gen_missions(m, count, g.seed, prefix), g.out);
        if (g.machine())
            std::cout << "missions=" << paths.size() << '\n';
        else
            std::cout << "wrote " << paths.size() << " missions to " << g.out << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const DiagnosticError& e) {
        std::cerr << "error: " << e.what() << '\n';
        for (const auto& d : e.diagnostics())
            std::cerr << "  " << d.to_string() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    for (const auto& w : warnings)
        std::cerr << "warning: " << w << '\n';
    return code;
}
