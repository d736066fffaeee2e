#pragma once

// Seeded benign mission corpus generation.

#include <cstdint>
#include <string>
#include <vector>

#include "modeguard/runtime.hpp"

namespace modeguard {

/// Mission shapes, in the proportions 10/12/5/5/8 per 40 missions.
enum class Archetype { StraightLine, MultiWaypoint, Hover, Polygon, Circular };

std::string archetype_tag(Archetype a); // sl, mw, hfe, pp, cp

/// Integer and boolean fields of the input record other than the mode request.
std::vector<std::string> input_flags(const FirmwareModule& module);

/// Deterministic for (module, count, seed). Every (mode, flag) pair outside
/// FAILSAFE is visited by one of the first ten missions; each visit is
/// `setmode M; wait W; input F 1; wait W; input F 0`. Throws UsageError
/// for count 0.
std::vector<MissionScript> gen_missions(const FirmwareModule& module, std::size_t count, std::uint64_t seed,
                                        const std::string& prefix = "m");

/// One mission that enters every declared mode, FAILSAFE included.
MissionScript all_modes_mission(const FirmwareModule& module, std::int64_t wait = 40);

/// Writes `<name>.txt` per mission; returns the paths written.
std::vector<std::string> write_missions(const std::vector<MissionScript>& missions, const std::string& dir);

/// Every `*.txt` in `dir`, in file-name order.
std::vector<MissionScript> load_missions(const std::string& dir);

} // namespace modeguard
