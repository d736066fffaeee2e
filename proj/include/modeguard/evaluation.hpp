#pragma once

// Enforcement quality metrics over mission runs.

#include <cstddef>
#include <vector>

#include "modeguard/config.hpp"
#include "modeguard/runtime.hpp"

namespace modeguard {

/// (mode, function) pairs in the held-out profiles that `config` does not allow.
std::size_t missed_functions(const ModeConfig& config, const std::vector<RunReport>& held_out);

struct FprFnr {
    double fpr = 0.0;
    double fnr = 0.0;
    std::size_t runs = 0;
    std::size_t fail_safe_runs = 0;
    std::size_t allowed_in_visited_modes = 0;
    std::size_t unused_in_visited_modes = 0;
};

/// Enforces `config` on every mission. FPR is the share of runs that end in
/// fail-safe. FNR is the share of allowed (mode, function) pairs, over the
/// modes the missions visit, that never execute in that mode. The module is
/// guard-instrumented first when it carries no markers.
FprFnr fpr_fnr(const ModeConfig& config, const std::vector<MissionScript>& missions, const FirmwareModule& module);

} // namespace modeguard
