#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "modeguard/callgraph.hpp"
#include "modeguard/evaluation.hpp"
#include "modeguard/instrument.hpp"
#include "modeguard/missiongen.hpp"
#include "modeguard/modeanalysis.hpp"
#include "modeguard/pipeline.hpp"

namespace modeguard {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw FileFormatError("cannot write '" + path.string() + "'");
    os << text;
}

std::string pct(double fraction) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << fraction * 100.0;
    return os.str();
}

std::vector<RunReport> run_all(const FirmwareModule& module, const std::vector<MissionScript>& missions) {
    std::vector<RunReport> out;
    out.reserve(missions.size());
    for (const auto& m : missions)
        out.push_back(run_mission(module, m));
    return out;
}

std::vector<ProfileLog> profiles_of(const std::vector<RunReport>& runs, std::size_t from, std::size_t to) {
    std::vector<ProfileLog> out;
    for (std::size_t k = from; k < to && k < runs.size(); ++k)
        out.push_back(runs[k].per_mode_executed);
    return out;
}

} // namespace

std::optional<AttackScenario> attack_scenario(const FirmwareModule& module, const std::string& id) {
    AttackScenario s;
    s.id = id;
    if (id == "a1") {
        s.target = "disarm_motors";
        s.mode = "GUIDED";
        s.forbidden_effect = "disarm";
    } else if (id == "a2") {
        s.target = "output_min";
        s.mode = "GUIDED";
        s.forbidden_effect = "motors_off";
    } else if (id == "a3") {
        s.target = "disarm";
        s.forbidden_effect = "disarm";
        for (const char* m : {"MANUAL", "LOITER", "GUIDED"})
            if (module.has_mode(m)) {
                s.mode = m;
                break;
            }
    } else {
        throw UsageError("unknown attack scenario '" + id + "' (expected a1, a2 or a3)");
    }
    if (!module.find(s.target) || s.mode.empty() || !module.has_mode(s.mode))
        return std::nullopt;
    s.mission.name = "attack_" + id;
    s.mission.steps = {MissionStep::set_mode(s.mode), MissionStep::wait(60), MissionStep::hijack(s.target, 0),
                       MissionStep::wait(60)};
    return s;
}

AttackOutcome run_attack(const FirmwareModule& original, const FirmwareModule& guarded, const AttackScenario& scenario,
                         const ModeConfig& config) {
    AttackOutcome out;
    out.scenario = scenario.id;
    out.effect_without_monitor = run_mission(original, scenario.mission).has_effect(scenario.forbidden_effect);
    RunOptions opt;
    opt.monitor = MonitorMode::Enforce;
    opt.config = &config;
    RunReport r = run_mission(guarded, scenario.mission, opt);
    out.forbidden_calls = r.violation_count(ViolationEvent::Kind::ForbiddenCall);
    out.fail_safe = r.fail_safe;
    out.effect_under_enforce = r.has_effect(scenario.forbidden_effect);
    return out;
}

PipelineReport cmd_pipeline(const std::string& fir_file, const PipelineOptions& opt) {
    if (opt.out_dir.empty())
        throw UsageError("pipeline needs an output directory");
    PipelineReport rep;
    const FirmwareModule module = load_firmware(fir_file);
    rep.firmware_id = firmware_id_from_path(fir_file);
    rep.functions = module.functions.size();

    if (!module.has_mode(kFailSafeMode))
        throw MissingMode("firmware '" + rep.firmware_id + "' declares no FAILSAFE mode");
    if (module.is_instrumented())
        throw AlreadyInstrumented("pipeline expects uninstrumented firmware");

    // Analysis phase.
    CallGraphStages cg = analyze_callgraph(module);
    rep.edges_original = cg.original.edges.size();
    rep.edges_sig = cg.signature.edges.size();
    rep.edges_addr = cg.address.edges.size();
    rep.precision = rep.edges_original ? precision(rep.edges_original, rep.edges_addr) : 0.0;

    const FirmwareModule profiled = instrument_profile(module);
    const FirmwareModule guarded = instrument_guard(module);

    RunReport all_modes = run_mission(profiled, all_modes_mission(module));
    ModeEntryMap entries = detect_mode_entries(module, all_modes, {}, &rep.warnings);
    ModeConfig static_cfg = static_reachable(cg.address, module, entries, {module.entry}, rep.firmware_id);
    FunctionNames core = failsafe_core(module, cg.address);

    // Missions.
    fs::path out(opt.out_dir);
    fs::create_directories(out);
    std::vector<MissionScript> missions =
        opt.missions_dir.empty() ? gen_missions(module, 40, opt.seed) : load_missions(opt.missions_dir);
    if (missions.empty())
        throw UsageError("no missions to profile with");
    fs::remove_all(out / "missions");
    write_missions(missions, (out / "missions").string());
    for (const auto& m : missions)
        validate_mission(m, module);

    // Profiling.
    std::vector<RunReport> runs = run_all(profiled, missions);
    const std::size_t k_dyn = std::min(opt.profile_k, missions.size());
    ModeConfig dynamic_cfg =
        dynamic_config(profiles_of(runs, 0, k_dyn), module, &static_cfg, core, rep.firmware_id, &rep.warnings);
    validate_mode_config(static_cfg, module);
    validate_mode_config(dynamic_cfg, module);

    for (std::size_t k = 2; k <= 20 && k < missions.size(); k += 2) {
        ModeConfig c = dynamic_config(profiles_of(runs, 0, k), module, &static_cfg, core, rep.firmware_id);
        std::vector<RunReport> held(runs.begin() + static_cast<std::ptrdiff_t>(k), runs.end());
        rep.missed_curve[k] = missed_functions(c, held);
    }
    rep.missed_held_out = missed_functions(dynamic_cfg, run_all(profiled, gen_missions(module, 20, opt.seed + 1, "h")));

    for (const auto& mode : module.mode_names) {
        ModeRow row;
        row.mode = mode;
        row.total = rep.functions;
        row.dynamic_count = dynamic_cfg.per_mode.at(mode).size();
        row.static_count = static_cfg.per_mode.at(mode).size();
        row.reduction_dynamic = reduction(row.total, row.dynamic_count);
        row.reduction_static = reduction(row.total, row.static_count);
        rep.rows.push_back(row);
    }

    // Monitoring phase.
    bool ok = true;
    rep.enforced = !opt.permit_all;
    if (rep.enforced) {
        FprFnr s = fpr_fnr(static_cfg, missions, guarded);
        FprFnr d = fpr_fnr(dynamic_cfg, missions, guarded);
        rep.fpr_static = s.fpr;
        rep.fnr_static = s.fnr;
        rep.fpr_dynamic = d.fpr;
        rep.fnr_dynamic = d.fnr;
        ok = s.fpr == 0.0 && d.fpr == 0.0;
        for (const auto& id : opt.scenarios) {
            auto sc = attack_scenario(module, id);
            if (!sc) {
                rep.warnings.push_back("attack " + id + " does not apply to this firmware");
                continue;
            }
            bool detected = run_attack(module, guarded, *sc, dynamic_cfg).detected();
            rep.attacks[id] = detected;
            ok = ok && detected;
        }
    }
    rep.exit_code = ok ? kExitOk : kExitEnforcement;

    emit_mode_config(static_cfg, (out / "static.cfg").string());
    emit_mode_config(dynamic_cfg, (out / "dynamic.cfg").string());
    write_file(out / (rep.firmware_id + ".profile.fir"), serialize_firmware(profiled));
    write_file(out / (rep.firmware_id + ".guard.fir"), serialize_firmware(guarded));
    write_file(out / "report.txt", rep.to_text() + "\n" + rep.to_machine());
    return rep;
}

std::string PipelineReport::to_text() const {
    std::ostringstream os;
    os << "firmware " << firmware_id << " (" << functions << " functions)\n\n";
    os << "call graph   original " << edges_original << "  after signature " << edges_sig << "  after address "
       << edges_addr << "  precision " << std::lround(precision * 100.0) << "%\n\n";
    os << std::left << std::setw(10) << "mode" << std::right << std::setw(9) << "dynamic" << std::setw(9) << "static"
       << std::setw(8) << "total" << std::setw(14) << "red.dyn %" << std::setw(14) << "red.static %" << '\n';
    for (const auto& r : rows)
        os << std::left << std::setw(10) << r.mode << std::right << std::setw(9) << r.dynamic_count << std::setw(9)
           << r.static_count << std::setw(8) << r.total << std::setw(14) << pct(r.reduction_dynamic) << std::setw(14)
           << pct(r.reduction_static) << '\n';
    os << "\nmissed functions by profiling missions:";
    for (const auto& [k, n] : missed_curve)
        os << "  k=" << k << ":" << n;
    os << "\nmissed on held-out set: " << missed_held_out << '\n';
    if (enforced) {
        os << "FPR static " << pct(fpr_static) << "%  dynamic " << pct(fpr_dynamic) << "%\n";
        os << "FNR static " << pct(fnr_static) << "%  dynamic " << pct(fnr_dynamic) << "%\n";
        for (const auto& [id, det] : attacks)
            os << "attack " << id << ": " << (det ? "detected" : "NOT detected") << '\n';
    } else {
        os << "enforcement skipped (--permit-all)\n";
    }
    for (const auto& w : warnings)
        os << "warning: " << w << '\n';
    return os.str();
}

std::string PipelineReport::to_machine() const {
    std::ostringstream os;
    os << "firmware=" << firmware_id << '\n';
    os << "functions=" << functions << '\n';
    os << "edges_original=" << edges_original << " edges_sig=" << edges_sig << " edges_addr=" << edges_addr
       << " precision=" << std::lround(precision * 100.0) << "%\n";
    for (const auto& r : rows)
        os << "mode=" << r.mode << " dynamic=" << r.dynamic_count << " static=" << r.static_count
           << " total=" << r.total << " reduction_dynamic=" << pct(r.reduction_dynamic)
           << " reduction_static=" << pct(r.reduction_static) << '\n';
    for (const auto& [k, n] : missed_curve)
        os << "missed k=" << k << " count=" << n << '\n';
    os << "missed_heldout=" << missed_held_out << '\n';
    os << "enforcement=" << (enforced ? "enforced" : "skipped") << '\n';
    if (enforced) {
        os << "fpr_static=" << pct(fpr_static) << " fpr_dynamic=" << pct(fpr_dynamic) << '\n';
        os << "fnr_static=" << pct(fnr_static) << " fnr_dynamic=" << pct(fnr_dynamic) << '\n';
        for (const auto& [id, det] : attacks)
            os << "attack=" << id << " detected=" << (det ? 1 : 0) << '\n';
    }
    os << "exit=" << exit_code << '\n';
    return os.str();
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e))
        return kExitUsage;
    if (dynamic_cast<const SyntaxError*>(&e) || dynamic_cast<const ResolutionError*>(&e) ||
        dynamic_cast<const TypeError*>(&e) || dynamic_cast<const FileFormatError*>(&e))
        return kExitParse;
    return kExitAnalysis;
}

} // namespace modeguard
