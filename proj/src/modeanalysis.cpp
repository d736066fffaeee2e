#include <algorithm>
#include <cctype>
#include <deque>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "modeguard/modeanalysis.hpp"

namespace modeguard {
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Reachability that does not follow the edges in `cut` (switcher -> entry).
FunctionNames reach_cut(const CallGraph& cg, const FunctionNames& roots,
                        const std::set<std::pair<std::string, std::string>>& cut) {
    std::map<std::string, std::set<std::string>> succ;
    for (const auto& e : cg.edges)
        if (!cut.count({e.caller, e.callee}))
            succ[e.caller].insert(e.callee);
    FunctionNames seen;
    std::deque<std::string> work;
    for (const auto& r : roots)
        if (seen.insert(r).second)
            work.push_back(r);
    while (!work.empty()) {
        std::string f = std::move(work.front());
        work.pop_front();
        for (const auto& g : succ[f])
            if (seen.insert(g).second)
                work.push_back(g);
    }
    return seen;
}

std::set<std::pair<std::string, std::string>> transition_edges(const CallGraph& cg, const FirmwareModule& module,
                                                               const FunctionNames& targets) {
    std::set<std::pair<std::string, std::string>> cut;
    for (const auto& e : cg.edges)
        if (module.mode_switchers.count(e.caller) && targets.count(e.callee))
            cut.emplace(e.caller, e.callee);
    return cut;
}

const FunctionNames kNoFunctions;

} // namespace

const FunctionNames& ModeConfig::allowed(const std::string& mode) const {
    auto it = per_mode.find(mode);
    if (it == per_mode.end())
        throw UnknownMode("config '" + firmware_id + "' has no mode '" + mode + "'");
    return it->second;
}

std::string provenance_name(ModeConfig::Provenance p) {
    return p == ModeConfig::Provenance::Static ? "static" : "dynamic";
}

bool EntryPattern::matches(const std::string& mode, const std::string& function) const {
    std::string m = lower(mode);
    if (!regex_template)
        return lower(function).find(m) != std::string::npos;
    std::string re = *regex_template;
    for (std::size_t at; (at = re.find("{mode}")) != std::string::npos;)
        re.replace(at, 6, m);
    return std::regex_search(function, std::regex(re, std::regex::ECMAScript | std::regex::icase));
}

ModeEntryMap detect_mode_entries(const FirmwareModule& module, const RunReport& trace, const EntryPattern& pattern,
                                 std::vector<std::string>* warnings) {
    ModeEntryMap out;
    for (const auto& mode : module.mode_names) {
        bool entered = std::any_of(trace.mode_transitions.begin(), trace.mode_transitions.end(),
                                   [&](const ModeTransition& t) { return t.to == mode; });
        if (!entered)
            throw MissingMode("mode '" + mode + "' is never entered in trace '" + trace.mission + "'");
        FunctionNames candidates;
        for (const auto& o : trace.entry_observations)
            if (o.mode == mode)
                candidates.insert(o.function);
        FunctionNames accepted;
        for (const auto& c : candidates) {
            if (pattern.matches(mode, c))
                accepted.insert(c);
            else if (warnings)
                warnings->push_back("entry candidate '" + c + "' for mode " + mode +
                                    " rejected: name does not match the mode");
        }
        if (accepted.empty())
            throw NoEntryFound("no entry function found for mode '" + mode + "'");
        out.entries.emplace(mode, std::move(accepted));
    }
    return out;
}

ModeEntryMap annotated_entries(std::string_view ir_text) {
    ModeEntryMap out;
    std::istringstream is{std::string(ir_text)};
    std::string line;
    while (std::getline(is, line)) {
        auto at = line.find("@entry");
        if (at == std::string::npos || line.find('#') > at)
            continue;
        std::istringstream ws(line.substr(at + 6));
        std::string mode, fn;
        if (ws >> mode >> fn)
            out.entries[mode].insert(fn);
    }
    return out;
}

FunctionNames failsafe_entries(const FirmwareModule& module, const EntryPattern& pattern) {
    FunctionNames out;
    for (const auto& s : module.mode_switchers)
        for (const auto& i : module.at(s).body)
            if (i.op == Opcode::CallDirect && !module.mode_switchers.count(i.symbol) &&
                pattern.matches(std::string(kFailSafeMode), i.symbol))
                out.insert(i.symbol);
    return out;
}

FunctionNames failsafe_core(const FirmwareModule& module, const CallGraph& pruned, const EntryPattern& pattern) {
    FunctionNames mode_entries;
    for (const auto& s : module.mode_switchers)
        for (const auto& i : module.at(s).body)
            if (i.op == Opcode::CallDirect && !module.mode_switchers.count(i.symbol))
                for (const auto& mode : module.mode_names)
                    if (pattern.matches(mode, i.symbol))
                        mode_entries.insert(i.symbol);
    return reach_cut(pruned, failsafe_entries(module, pattern), transition_edges(pruned, module, mode_entries));
}

ModeConfig static_reachable(const CallGraph& cg, const FirmwareModule& module, const ModeEntryMap& entries,
                            const FunctionNames& always_roots, const std::string& firmware_id) {
    FunctionNames all_entries;
    for (const auto& [mode, fns] : entries.entries)
        all_entries.insert(fns.begin(), fns.end());
    for (const auto& r : always_roots)
        if (!cg.nodes.count(r))
            throw UnknownRoot("root '" + r + "' is not a function of the call graph");
    for (const auto& r : all_entries)
        if (!cg.nodes.count(r))
            throw UnknownRoot("entry '" + r + "' is not a function of the call graph");

    auto cut = transition_edges(cg, module, all_entries);
    FunctionNames shared = reach_cut(cg, always_roots, cut);

    ModeConfig out;
    out.provenance = ModeConfig::Provenance::Static;
    out.firmware_id = firmware_id;
    FunctionNames boot = reach_cut(cg, {module.entry}, cut);
    boot.insert(shared.begin(), shared.end());
    out.per_mode.emplace(std::string(kBootMode), std::move(boot));
    for (const auto& mode : module.mode_names) {
        auto it = entries.entries.find(mode);
        if (it == entries.entries.end())
            throw MissingMode("no entry functions for mode '" + mode + "'");
        FunctionNames set = reach_cut(cg, it->second, cut);
        set.insert(shared.begin(), shared.end());
        out.per_mode.emplace(mode, std::move(set));
    }
    return out;
}

ModeConfig dynamic_config(const std::vector<ProfileLog>& profiles, const FirmwareModule& module,
                          const ModeConfig* static_fallback, const FunctionNames& core,
                          const std::string& firmware_id, std::vector<std::string>* warnings) {
    ModeConfig out;
    out.provenance = ModeConfig::Provenance::Dynamic;
    out.firmware_id = firmware_id;
    std::vector<std::string> modes{std::string(kBootMode)};
    modes.insert(modes.end(), module.mode_names.begin(), module.mode_names.end());
    for (const auto& mode : modes) {
        FunctionNames set;
        for (const auto& p : profiles)
            if (auto it = p.find(mode); it != p.end())
                set.insert(it->second.begin(), it->second.end());
        if (set.empty()) {
            if (static_fallback && static_fallback->per_mode.count(mode)) {
                set = static_fallback->per_mode.at(mode);
                out.fallback_modes.insert(mode);
            } else if (warnings) {
                warnings->push_back("mode " + mode + " was never profiled; its table is empty");
            }
        }
        out.per_mode.emplace(mode, std::move(set));
    }
    if (auto it = out.per_mode.find(std::string(kFailSafeMode)); it != out.per_mode.end())
        it->second.insert(core.begin(), core.end());
    return out;
}

double reduction(std::size_t total_functions, std::size_t allowed) {
    if (total_functions == 0)
        throw DomainError("reduction: total function count is zero");
    if (allowed > total_functions)
        throw DomainError("reduction: allowed count exceeds total");
    return static_cast<double>(total_functions - allowed) / static_cast<double>(total_functions);
}

std::string serialize_mode_config(const ModeConfig& config) {
    std::ostringstream os;
    os << "firmware " << config.firmware_id << '\n';
    os << "provenance " << provenance_name(config.provenance) << '\n';
    for (const auto& [mode, fns] : config.per_mode) {
        os << "mode " << mode << (config.fallback_modes.count(mode) ? " fallback" : "") << '\n';
        for (const auto& f : fns)
            os << f << '\n';
        os << '\n';
    }
    return os.str();
}

ModeConfig parse_mode_config(std::string_view text) {
    ModeConfig out;
    std::istringstream is{std::string(text)};
    std::string line;
    int n = 0;
    auto bad = [&](const std::string& msg) -> FileFormatError {
        return FileFormatError("config line " + std::to_string(n) + ": " + msg);
    };
    auto header = [&](const std::string& key) {
        if (!std::getline(is, line))
            throw FileFormatError("config ends before '" + key + "' header");
        ++n;
        std::istringstream ws(line);
        std::string k, v, extra;
        if (!(ws >> k >> v) || k != key || (ws >> extra))
            throw bad("expected '" + key + " VALUE'");
        return v;
    };
    out.firmware_id = header("firmware");
    std::string prov = header("provenance");
    if (prov == "static")
        out.provenance = ModeConfig::Provenance::Static;
    else if (prov == "dynamic")
        out.provenance = ModeConfig::Provenance::Dynamic;
    else
        throw bad("provenance must be static or dynamic");

    FunctionNames* current = nullptr;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty()) {
            current = nullptr;
            continue;
        }
        std::istringstream ws(line);
        std::vector<std::string> w;
        for (std::string t; ws >> t;)
            w.push_back(t);
        if (current) {
            if (w.size() != 1 || w[0] != line)
                throw bad("expected one function name per line");
            current->insert(w[0]);
            continue;
        }
        if (w.empty() || w[0] != "mode" || w.size() < 2 || w.size() > 3 || (w.size() == 3 && w[2] != "fallback"))
            throw bad("expected 'mode NAME [fallback]'");
        auto [it, fresh] = out.per_mode.emplace(w[1], FunctionNames{});
        if (!fresh)
            throw bad("mode '" + w[1] + "' listed twice");
        if (w.size() == 3)
            out.fallback_modes.insert(w[1]);
        current = &it->second;
    }
    return out;
}

void emit_mode_config(const ModeConfig& config, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw FileFormatError("cannot write config '" + path + "'");
    os << serialize_mode_config(config);
}

ModeConfig load_mode_config(const std::string& path, const FirmwareModule* module) {
    std::ifstream in(path);
    if (!in)
        throw FileFormatError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    ModeConfig c = parse_mode_config(ss.str());
    if (module)
        validate_mode_config(c, *module);
    return c;
}

void validate_mode_config(const ModeConfig& config, const FirmwareModule& module) {
    for (const auto& [mode, fns] : config.per_mode) {
        if (mode != kBootMode && !module.has_mode(mode))
            throw UnknownMode("config lists mode '" + mode + "' that the firmware does not declare");
        for (const auto& f : fns)
            if (!module.find(f))
                throw UnknownFunction("config mode " + mode + " allows unknown function '" + f + "'");
    }
    if (!config.per_mode.count(std::string(kBootMode)))
        throw MissingMode("config has no " + std::string(kBootMode) + " table");
    for (const auto& mode : module.mode_names)
        if (!config.per_mode.count(mode))
            throw MissingMode("config has no table for mode '" + mode + "'");
    if (!module.has_mode(kFailSafeMode))
        throw MissingMode("firmware declares no FAILSAFE mode");

    FunctionNames core = failsafe_core(module, analyze_callgraph(module).address);
    const FunctionNames& fs = config.per_mode.at(std::string(kFailSafeMode));
    for (const auto& f : core)
        if (!fs.count(f))
            throw ConfigInvariantError("FAILSAFE table lacks required function '" + f + "'");
}

std::string firmware_id_from_path(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

} // namespace modeguard
