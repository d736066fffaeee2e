#pragma once

// Mission scripts, the per-mode monitor and the deterministic interpreter
// that runs firmware against them.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modeguard/config.hpp"
#include "modeguard/ir.hpp"

namespace modeguard {

// ---------------------------------------------------------------- missions

struct MissionStep {
    enum class Kind {
        SetMode,       // setmode NAME
        Input,         // input NAME N
        Hijack,        // hijack FUNC at N
        CorruptReturn, // corrupt-return FUNC at N
        Wait,          // wait N
    };

    Kind kind = Kind::Wait;
    std::string name; // mode, input field or function
    std::int64_t value = 0;

    static MissionStep set_mode(std::string mode) { return {Kind::SetMode, std::move(mode), 0}; }
    static MissionStep input(std::string field, std::int64_t v) { return {Kind::Input, std::move(field), v}; }
    static MissionStep hijack(std::string fn, std::int64_t at) { return {Kind::Hijack, std::move(fn), at}; }
    static MissionStep corrupt_return(std::string fn, std::int64_t at) {
        return {Kind::CorruptReturn, std::move(fn), at};
    }
    static MissionStep wait(std::int64_t ticks) { return {Kind::Wait, {}, ticks}; }

    friend bool operator==(const MissionStep&, const MissionStep&) = default;
};

struct MissionScript {
    std::string name;
    std::vector<MissionStep> steps;
    friend bool operator==(const MissionScript&, const MissionScript&) = default;
};

/// Throws FileFormatError with the offending line number.
MissionScript parse_mission(std::string_view text);
MissionScript load_mission(const std::string& path);
std::string serialize_mission(const MissionScript& mission);

/// Throws UnknownMode, UnknownFunction or DomainError (unknown input field,
/// negative count).
void validate_mission(const MissionScript& mission, const FirmwareModule& module);

// ----------------------------------------------------------------- monitor

using ReturnSite = CallSite;

struct ViolationEvent {
    enum class Kind { ForbiddenCall, ReturnMismatch };

    Kind kind = Kind::ForbiddenCall;
    std::string mode;
    CallSite site;
    std::string target; // called function, or the offending return descriptor
    std::uint64_t tick = 0;

    std::string to_string() const; // `violation kind=... mode=... site=... target=... tick=...`
    friend bool operator==(const ViolationEvent&, const ViolationEvent&) = default;
};

std::string violation_kind_name(ViolationEvent::Kind k);

struct ShadowStats {
    std::uint64_t pushes = 0;
    std::uint64_t pops = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t max_depth = 0;
    /// Entry-loop iterations that ended with a non-empty shadow stack.
    std::uint64_t unbalanced_iterations = 0;
    friend bool operator==(const ShadowStats&, const ShadowStats&) = default;
};

struct MonitorState {
    std::string current_mode{kBootMode};
    FunctionNames table;
    std::vector<ReturnSite> shadow_stack;
    std::vector<ViolationEvent> violations;
    bool fail_safe_triggered = false;
    /// Allow every call and return; the shadow stack is still maintained.
    bool permit_all = false;
    ShadowStats stats;
};

struct MonitorDecision {
    bool allowed = true;
    std::optional<ViolationEvent> violation;
};

/// Loads the new mode's table. Throws UnknownMode.
MonitorState monitor_mode_switch(MonitorState state, const std::string& new_mode, const ModeConfig& config);

/// Pushes `return_site` when `target` is allowed; otherwise records a
/// ForbiddenCall. Fail-safe is the caller's job.
MonitorDecision monitor_call(MonitorState& state, const std::string& target, const ReturnSite& return_site,
                             std::uint64_t tick);

/// Pops and compares against `actual`. Underflow counts as a mismatch.
MonitorDecision monitor_return(MonitorState& state, const ReturnSite& actual, std::uint64_t tick);

/// Switches to FAILSAFE and loads its table. Idempotent. Throws FatalConfig
/// when the config has no FAILSAFE entry.
MonitorState fail_safe(MonitorState state, const ModeConfig& config);

// ------------------------------------------------------------- interpreter

enum class MonitorMode { Off, PermitAll, Enforce };

struct RunOptions {
    MonitorMode monitor = MonitorMode::Off;
    const ModeConfig* config = nullptr;
    /// Firmware instructions allowed per entry-loop iteration.
    std::uint64_t iteration_budget = 1'000'000;
    std::size_t max_call_depth = 512;
    bool record_events = false;
};

struct EffectEvent {
    std::uint64_t tick = 0;
    std::string name;
    std::vector<std::string> args;
    friend bool operator==(const EffectEvent&, const EffectEvent&) = default;
};

struct ModeTransition {
    std::uint64_t tick = 0;
    std::string from; // empty for the boot transition
    std::string to;
    friend bool operator==(const ModeTransition&, const ModeTransition&) = default;
};

/// A non-switcher function called by a switcher after its setmode.
struct EntryObservation {
    std::string mode;
    std::string function;
    std::uint64_t tick = 0;
    friend bool operator==(const EntryObservation&, const EntryObservation&) = default;
};

struct TraversedEdge {
    CallSite site;
    std::string callee;
    friend auto operator<=>(const TraversedEdge&, const TraversedEdge&) = default;
};

struct RunReport {
    std::string mission;
    std::vector<EffectEvent> effects;
    std::vector<ModeTransition> mode_transitions;
    std::vector<ViolationEvent> violations;
    bool fail_safe = false;
    /// Profiler output, filled by log_fn markers.
    ProfileLog per_mode_executed;
    /// Every function entered, keyed by the mode current at entry.
    ProfileLog observed;
    /// Indirect calls executed with their genuine targets (hijacks excluded).
    std::set<TraversedEdge> indirect_edges;
    std::vector<EntryObservation> entry_observations;
    ShadowStats shadow;
    std::vector<std::string> events;
    std::uint64_t ticks = 0;

    bool has_effect(const std::string& name) const;
    std::size_t violation_count(ViolationEvent::Kind kind) const;

    std::string to_text() const;
    std::string to_machine() const;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Runs `mission` against `module`. Throws RuntimeFault, ConfigMissing and
/// the mission validation errors.
RunReport run_mission(const FirmwareModule& module, const MissionScript& mission, const RunOptions& options = {});

} // namespace modeguard
