#include "modeguard/evaluation.hpp"
#include "modeguard/instrument.hpp"

namespace modeguard {

std::size_t missed_functions(const ModeConfig& config, const std::vector<RunReport>& held_out) {
    std::set<std::pair<std::string, std::string>> missed;
    for (const auto& r : held_out)
        for (const auto& [mode, fns] : r.per_mode_executed) {
            auto it = config.per_mode.find(mode);
            for (const auto& f : fns)
                if (it == config.per_mode.end() || !it->second.count(f))
                    missed.emplace(mode, f);
        }
    return missed.size();
}

FprFnr fpr_fnr(const ModeConfig& config, const std::vector<MissionScript>& missions, const FirmwareModule& module) {
    const FirmwareModule guarded = module.is_instrumented() ? module : instrument_guard(module);
    RunOptions opt;
    opt.monitor = MonitorMode::Enforce;
    opt.config = &config;

    FprFnr out;
    ProfileLog executed;
    for (const auto& m : missions) {
        RunReport r = run_mission(guarded, m, opt);
        ++out.runs;
        out.fail_safe_runs += r.fail_safe;
        for (const auto& [mode, fns] : r.observed)
            executed[mode].insert(fns.begin(), fns.end());
    }
    for (const auto& [mode, fns] : executed) {
        auto it = config.per_mode.find(mode);
        if (it == config.per_mode.end())
            continue;
        for (const auto& f : it->second) {
            ++out.allowed_in_visited_modes;
            out.unused_in_visited_modes += !fns.count(f);
        }
    }
    if (out.runs)
        out.fpr = static_cast<double>(out.fail_safe_runs) / static_cast<double>(out.runs);
    if (out.allowed_in_visited_modes)
        out.fnr = static_cast<double>(out.unused_in_visited_modes) / static_cast<double>(out.allowed_in_visited_modes);
    return out;
}

} // namespace modeguard
