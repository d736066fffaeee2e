#pragma once

// Module-to-module instrumentation passes: profiling markers and guards.

#include "modeguard/ir.hpp"

namespace modeguard {

/// Inserts `mode_entry` right after every setmode in each switcher and a
/// `log_fn` as the first instruction of every other function. Throws
/// InvalidModule, NoSwitcher, AlreadyInstrumented.
FirmwareModule instrument_profile(const FirmwareModule& module);

/// Inserts `mode_entry` in switchers as above and, in every other function,
/// turns each `icall` into `mcall` and each `ret` into `mret`. Direct calls
/// stay as they are. Same errors as instrument_profile.
FirmwareModule instrument_guard(const FirmwareModule& module);

} // namespace modeguard
