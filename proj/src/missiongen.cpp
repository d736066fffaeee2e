#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "modeguard/missiongen.hpp"

namespace modeguard {
namespace {

namespace fs = std::filesystem;

struct Visit {
    std::string mode;
    std::string flag; // empty: no input change
};

const std::vector<std::vector<std::string>>& templates(Archetype a) {
    static const std::vector<std::vector<std::string>> sl{{"GUIDED", "AUTO", "LAND"}, {"AUTO", "RTL"}};
    static const std::vector<std::vector<std::string>> mw{{"AUTO", "LOITER", "AUTO", "RTL", "LAND"},
                                                         {"GUIDED", "AUTO", "HOLD", "AUTO"}};
    static const std::vector<std::vector<std::string>> hfe{{"GUIDED", "LOITER", "LAND"}, {"MANUAL", "HOLD"}};
    static const std::vector<std::vector<std::string>> pp{{"AUTO", "GUIDED", "AUTO", "GUIDED", "RTL"},
                                                         {"MANUAL", "AUTO", "LOITER"}};
    static const std::vector<std::vector<std::string>> cp{{"CIRCLE", "RTL", "LAND"}, {"LOITER", "CIRCLE", "TURTLE"}};
    switch (a) {
    case Archetype::StraightLine: return sl;
    case Archetype::MultiWaypoint: return mw;
    case Archetype::Hover: return hfe;
    case Archetype::Polygon: return pp;
    case Archetype::Circular: return cp;
    }
    return sl;
}

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

} // namespace

std::string archetype_tag(Archetype a) {
    switch (a) {
    case Archetype::StraightLine: return "sl";
    case Archetype::MultiWaypoint: return "mw";
    case Archetype::Hover: return "hfe";
    case Archetype::Polygon: return "pp";
    case Archetype::Circular: return "cp";
    }
    return "?";
}

std::vector<std::string> input_flags(const FirmwareModule& module) {
    std::vector<std::string> out;
    if (const TypeDesc* in = module.global_type(kInputGlobal))
        for (const auto& f : in->fields())
            if (f.type.is_scalar_int() && f.name != kModeRequestField)
                out.push_back(f.name);
    return out;
}

std::vector<MissionScript> gen_missions(const FirmwareModule& module, std::size_t count, std::uint64_t seed,
                                        const std::string& prefix) {
    if (count == 0)
        throw UsageError("mission count must be at least 1");
    std::vector<std::string> modes;
    for (const auto& m : module.mode_names)
        if (m != kFailSafeMode)
            modes.push_back(m);
    if (modes.empty())
        throw DomainError("firmware has no mode besides FAILSAFE to fly missions in");
    const std::vector<std::string> flags = input_flags(module);

    std::mt19937_64 rng(seed);
    std::vector<Archetype> mix;
    const std::pair<Archetype, int> weights[] = {{Archetype::StraightLine, 10},
                                                 {Archetype::MultiWaypoint, 12},
                                                 {Archetype::Hover, 5},
                                                 {Archetype::Polygon, 5},
                                                 {Archetype::Circular, 8}};
    for (const auto& [a, n] : weights)
        mix.insert(mix.end(), static_cast<std::size_t>(n), a);
    std::shuffle(mix.begin(), mix.end(), rng);

    // Coverage schedule: every (mode, flag) pair lands in one of the first ten missions.
    std::vector<Visit> features;
    for (const auto& m : modes)
        for (const auto& f : flags)
            features.push_back({m, f});
    if (flags.empty())
        for (const auto& m : modes)
            features.push_back({m, ""});
    std::shuffle(features.begin(), features.end(), rng);
    const std::size_t scheduled = std::min<std::size_t>(count, 10);
    std::vector<std::vector<Visit>> schedule(scheduled);
    for (std::size_t k = 0; k < features.size(); ++k)
        schedule[k % scheduled].push_back(features[k]);

    auto random_flag = [&]() -> std::string {
        std::size_t pick = draw(rng, flags.size() + 1);
        return pick == flags.size() ? std::string() : flags[pick];
    };

    std::vector<MissionScript> out;
    const int width = count > 100 ? 3 : 2;
    for (std::size_t i = 0; i < count; ++i) {
        Archetype a = mix[i % mix.size()];
        std::string idx = std::to_string(i);
        idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))), '0');

        std::vector<Visit> visits;
        if (i < scheduled)
            visits = schedule[i];
        const auto& options = templates(a);
        for (const auto& m : options[draw(rng, options.size())])
            if (module.has_mode(m))
                visits.push_back({m, random_flag()});
        if (visits.empty())
            visits.push_back({modes[draw(rng, modes.size())], random_flag()});

        MissionScript ms;
        ms.name = prefix + idx + "_" + archetype_tag(a);
        for (const auto& v : visits) {
            ms.steps.push_back(MissionStep::set_mode(v.mode));
            ms.steps.push_back(MissionStep::wait(80 + static_cast<std::int64_t>(draw(rng, 121))));
            if (!v.flag.empty()) {
                ms.steps.push_back(MissionStep::input(v.flag, 1));
                ms.steps.push_back(MissionStep::wait(80 + static_cast<std::int64_t>(draw(rng, 121))));
                ms.steps.push_back(MissionStep::input(v.flag, 0));
            }
        }
        out.push_back(std::move(ms));
    }
    return out;
}

MissionScript all_modes_mission(const FirmwareModule& module, std::int64_t wait) {
    MissionScript ms;
    ms.name = "all_modes";
    for (const auto& m : module.mode_names) {
        ms.steps.push_back(MissionStep::set_mode(m));
        ms.steps.push_back(MissionStep::wait(wait));
    }
    return ms;
}

std::vector<std::string> write_missions(const std::vector<MissionScript>& missions, const std::string& dir) {
    fs::create_directories(dir);
    std::vector<std::string> paths;
    for (const auto& m : missions) {
        std::string path = (fs::path(dir) / (m.name + ".txt")).string();
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw FileFormatError("cannot write mission '" + path + "'");
        os << serialize_mission(m);
        paths.push_back(path);
    }
    return paths;
}

std::vector<MissionScript> load_missions(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw FileFormatError("mission directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<MissionScript> out;
    for (const auto& f : files)
        out.push_back(load_mission(f.string()));
    return out;
}

} // namespace modeguard
