#pragma once

// Per-mode allowlists: the artifact produced by mode analysis and enforced
// by the runtime monitor.

#include <map>
#include <set>
#include <string>

namespace modeguard {

using FunctionNames = std::set<std::string>;

/// mode -> functions seen while that mode was current.
using ProfileLog = std::map<std::string, FunctionNames>;

struct ModeEntryMap {
    std::map<std::string, FunctionNames> entries;
    friend bool operator==(const ModeEntryMap&, const ModeEntryMap&) = default;
};

struct ModeConfig {
    enum class Provenance { Static, Dynamic };

    Provenance provenance = Provenance::Static;
    std::string firmware_id;
    /// Includes the boot mode key alongside every declared mode.
    std::map<std::string, FunctionNames> per_mode;
    /// Dynamic configs only: modes never profiled, filled from static sets.
    std::set<std::string> fallback_modes;

    const FunctionNames& allowed(const std::string& mode) const; // throws UnknownMode

    friend bool operator==(const ModeConfig&, const ModeConfig&) = default;
};

std::string provenance_name(ModeConfig::Provenance p);

} // namespace modeguard
