#pragma once

// End-to-end driver: analysis, guard insertion, profiling, enforcement and
// attack replay, plus the report they produce.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modeguard/config.hpp"
#include "modeguard/runtime.hpp"

namespace modeguard {

/// A scripted control-flow hijack into a restricted function.
struct AttackScenario {
    std::string id; // a1, a2, a3
    std::string mode;
    std::string target;
    std::string forbidden_effect;
    MissionScript mission;
};

/// nullopt when the firmware lacks the target function or a usable mode.
std::optional<AttackScenario> attack_scenario(const FirmwareModule& module, const std::string& id);

struct AttackOutcome {
    std::string scenario;
    bool effect_without_monitor = false;
    std::size_t forbidden_calls = 0;
    bool fail_safe = false;
    bool effect_under_enforce = false;

    bool detected() const { return forbidden_calls == 1 && fail_safe && !effect_under_enforce; }
};

/// Runs the scenario unmonitored on `original` and enforced on `guarded`.
AttackOutcome run_attack(const FirmwareModule& original, const FirmwareModule& guarded, const AttackScenario& scenario,
                         const ModeConfig& config);

struct ModeRow {
    std::string mode;
    std::size_t dynamic_count = 0;
    std::size_t static_count = 0;
    std::size_t total = 0;
    double reduction_dynamic = 0.0;
    double reduction_static = 0.0;
};

struct PipelineOptions {
    std::string missions_dir; // empty: generate 40 missions with `seed`
    std::string out_dir;
    std::uint64_t seed = 1;
    std::size_t profile_k = 10;
    bool permit_all = false;
    std::vector<std::string> scenarios{"a1", "a2", "a3"};
};

struct PipelineReport {
    std::string firmware_id;
    std::size_t functions = 0;
    std::size_t edges_original = 0;
    std::size_t edges_sig = 0;
    std::size_t edges_addr = 0;
    double precision = 0.0;
    std::vector<ModeRow> rows;
    std::map<std::size_t, std::size_t> missed_curve; // k -> missed functions
    std::size_t missed_held_out = 0;
    bool enforced = true;
    double fpr_static = 0.0;
    double fpr_dynamic = 0.0;
    double fnr_static = 0.0;
    double fnr_dynamic = 0.0;
    std::map<std::string, bool> attacks; // scenario -> detected
    std::vector<std::string> warnings;
    int exit_code = 0;

    std::string to_text() const;
    std::string to_machine() const;
};

/// Exit codes: 0 ok, 1 usage, 2 parse, 3 analysis, 4 enforcement failure.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitParse = 2, kExitAnalysis = 3, kExitEnforcement = 4 };

/// Writes static.cfg, dynamic.cfg, <id>.profile.fir, <id>.guard.fir,
/// missions/ and report.txt into the output directory. Errors propagate as
/// exceptions; `exit_code` covers the enforcement outcome.
PipelineReport cmd_pipeline(const std::string& fir_file, const PipelineOptions& options);

/// Maps an exception thrown by the toolkit to its documented exit code.
int exit_code_for(const std::exception& e);

} // namespace modeguard
