#pragma once

// Mode-entry detection, per-mode required-function sets (static and
// profiled), the reduction metric and the config file format.

#include <optional>
#include <string>
#include <vector>

#include "modeguard/callgraph.hpp"
#include "modeguard/config.hpp"
#include "modeguard/runtime.hpp"

namespace modeguard {

/// How candidate entry names are matched against a mode name. Without a
/// template the lower-cased mode name must be a substring of the lower-cased
/// function name. A template is an ECMAScript regex in which `{mode}` is
/// replaced by the lower-cased mode name, matched case-insensitively.
struct EntryPattern {
    std::optional<std::string> regex_template;

    bool matches(const std::string& mode, const std::string& function) const;
};

/// Throws MissingMode or NoEntryFound. Rejected candidates are appended to
/// `warnings`.
ModeEntryMap detect_mode_entries(const FirmwareModule& module, const RunReport& all_modes_trace,
                                 const EntryPattern& pattern = {}, std::vector<std::string>* warnings = nullptr);

/// Entries read from `# @entry MODE function` comments in IR text.
ModeEntryMap annotated_entries(std::string_view ir_text);

/// Direct callees of the switchers that match FAILSAFE by name.
FunctionNames failsafe_entries(const FirmwareModule& module, const EntryPattern& pattern = {});

/// Static required set of the FAILSAFE mode: everything reachable from its
/// entry over the pruned graph.
FunctionNames failsafe_core(const FirmwareModule& module, const CallGraph& pruned,
                            const EntryPattern& pattern = {});

/// perMode(m) = reach(entries(m)) + reach(always_roots), plus a boot-mode
/// table reach(entry). Switcher -> mode-entry edges are mode transitions and
/// are not followed. Throws UnknownRoot and MissingMode.
ModeConfig static_reachable(const CallGraph& cg, const FirmwareModule& module, const ModeEntryMap& entries,
                            const FunctionNames& always_roots, const std::string& firmware_id);

/// Union of the profiles per mode. Modes never profiled take the static set
/// when `static_fallback` is given (recorded in fallback_modes), else stay
/// empty with a warning. The FAILSAFE table always includes `failsafe_core`.
ModeConfig dynamic_config(const std::vector<ProfileLog>& profiles, const FirmwareModule& module,
                          const ModeConfig* static_fallback, const FunctionNames& failsafe_core,
                          const std::string& firmware_id, std::vector<std::string>* warnings = nullptr);

/// (total - allowed) / total. Throws DomainError.
double reduction(std::size_t total_functions, std::size_t allowed);

std::string serialize_mode_config(const ModeConfig& config);
/// Throws FileFormatError.
ModeConfig parse_mode_config(std::string_view text);

void emit_mode_config(const ModeConfig& config, const std::string& path);
/// Parses and, when `module` is given, validates. Throws FileFormatError,
/// UnknownFunction, MissingMode, ConfigInvariantError.
ModeConfig load_mode_config(const std::string& path, const FirmwareModule* module = nullptr);

/// Throws UnknownFunction, MissingMode, ConfigInvariantError.
void validate_mode_config(const ModeConfig& config, const FirmwareModule& module);

/// File stem of a path: `corpus/toycopter.fir` -> `toycopter`.
std::string firmware_id_from_path(const std::string& path);

} // namespace modeguard
