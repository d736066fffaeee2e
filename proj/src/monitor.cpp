#include <algorithm>

#include "modeguard/runtime.hpp"

namespace modeguard {

std::string violation_kind_name(ViolationEvent::Kind k) {
    return k == ViolationEvent::Kind::ForbiddenCall ? "ForbiddenCall" : "ReturnMismatch";
}

std::string ViolationEvent::to_string() const {
    return "violation kind=" + violation_kind_name(kind) + " mode=" + mode + " site=" + site.to_string() +
           " target=" + target + " tick=" + std::to_string(tick);
}

MonitorState monitor_mode_switch(MonitorState state, const std::string& new_mode, const ModeConfig& config) {
    auto it = config.per_mode.find(new_mode);
    if (it == config.per_mode.end())
        throw UnknownMode("mode '" + new_mode + "' has no table in config '" + config.firmware_id + "'");
    state.current_mode = new_mode;
    state.table = it->second;
    return state;
}

MonitorDecision monitor_call(MonitorState& state, const std::string& target, const ReturnSite& return_site,
                             std::uint64_t tick) {
    if (state.permit_all || state.table.count(target)) {
        state.shadow_stack.push_back(return_site);
        ++state.stats.pushes;
        state.stats.max_depth = std::max<std::uint64_t>(state.stats.max_depth, state.shadow_stack.size());
        return {};
    }
    ViolationEvent v{ViolationEvent::Kind::ForbiddenCall, state.current_mode, return_site, target, tick};
    state.violations.push_back(v);
    return {false, v};
}

MonitorDecision monitor_return(MonitorState& state, const ReturnSite& actual, std::uint64_t tick) {
    std::optional<ReturnSite> expected;
    if (!state.shadow_stack.empty()) {
        expected = state.shadow_stack.back();
        state.shadow_stack.pop_back();
        ++state.stats.pops;
    }
    if (expected && *expected == actual)
        return {};
    ++state.stats.mismatches;
    if (state.permit_all)
        return {};
    ViolationEvent v{ViolationEvent::Kind::ReturnMismatch, state.current_mode,
                     expected.value_or(ReturnSite{"<empty>", 0}), actual.to_string(), tick};
    state.violations.push_back(v);
    return {false, v};
}

MonitorState fail_safe(MonitorState state, const ModeConfig& config) {
    if (state.fail_safe_triggered)
        return state;
    auto it = config.per_mode.find(std::string(kFailSafeMode));
    if (it == config.per_mode.end())
        throw FatalConfig("config '" + config.firmware_id + "' has no FAILSAFE table");
    state.current_mode = std::string(kFailSafeMode);
    state.table = it->second;
    state.fail_safe_triggered = true;
    return state;
}

} // namespace modeguard
