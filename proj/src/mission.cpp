#include <charconv>
#include <fstream>
#include <sstream>

#include "modeguard/runtime.hpp"

namespace modeguard {
namespace {

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream is{std::string(line)};
    std::string w;
    while (is >> w)
        out.push_back(w);
    return out;
}

std::int64_t parse_count(const std::string& s, int line) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw FileFormatError("mission line " + std::to_string(line) + ": expected an integer, got '" + s + "'");
    return v;
}

[[noreturn]] void bad(int line, const std::string& msg) {
    throw FileFormatError("mission line " + std::to_string(line) + ": " + msg);
}

} // namespace

MissionScript parse_mission(std::string_view text) {
    MissionScript m;
    bool named = false;
    int line_no = 0;
    std::istringstream is{std::string(text)};
    std::string raw;
    while (std::getline(is, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        auto w = split_words(raw);
        if (w.empty())
            continue;
        const std::string& kw = w[0];
        if (kw == "mission") {
            if (named)
                bad(line_no, "duplicate mission header");
            if (w.size() != 2)
                bad(line_no, "expected 'mission NAME'");
            m.name = w[1];
            named = true;
            continue;
        }
        if (!named)
            bad(line_no, "steps before the 'mission' header");
        if (kw == "setmode" && w.size() == 2) {
            m.steps.push_back(MissionStep::set_mode(w[1]));
        } else if (kw == "input" && w.size() == 3) {
            m.steps.push_back(MissionStep::input(w[1], parse_count(w[2], line_no)));
        } else if ((kw == "hijack" || kw == "corrupt-return") && w.size() == 4 && w[2] == "at") {
            std::int64_t at = parse_count(w[3], line_no);
            if (at < 0)
                bad(line_no, "call index must be >= 0");
            m.steps.push_back(kw == "hijack" ? MissionStep::hijack(w[1], at) : MissionStep::corrupt_return(w[1], at));
        } else if (kw == "wait" && w.size() == 2) {
            std::int64_t n = parse_count(w[1], line_no);
            if (n < 0)
                bad(line_no, "wait count must be >= 0");
            m.steps.push_back(MissionStep::wait(n));
        } else {
            bad(line_no, "unrecognized step '" + raw + "'");
        }
    }
    if (!named)
        throw FileFormatError("mission has no 'mission NAME' header");
    return m;
}

MissionScript load_mission(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FileFormatError("cannot open mission file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_mission(ss.str());
}

std::string serialize_mission(const MissionScript& m) {
    std::ostringstream os;
    os << "mission " << m.name << '\n';
    for (const auto& s : m.steps) {
        switch (s.kind) {
        case MissionStep::Kind::SetMode: os << "setmode " << s.name; break;
        case MissionStep::Kind::Input: os << "input " << s.name << ' ' << s.value; break;
        case MissionStep::Kind::Hijack: os << "hijack " << s.name << " at " << s.value; break;
        case MissionStep::Kind::CorruptReturn: os << "corrupt-return " << s.name << " at " << s.value; break;
        case MissionStep::Kind::Wait: os << "wait " << s.value; break;
        }
        os << '\n';
    }
    return os.str();
}

void validate_mission(const MissionScript& mission, const FirmwareModule& module) {
    const TypeDesc* in = module.global_type(kInputGlobal);
    for (const auto& s : mission.steps) {
        switch (s.kind) {
        case MissionStep::Kind::SetMode:
            if (!module.has_mode(s.name))
                throw UnknownMode("mission '" + mission.name + "' requests unknown mode '" + s.name + "'");
            if (!in || !in->field_type(kModeRequestField))
                throw DomainError("firmware has no '%in." + std::string(kModeRequestField) +
                                  "' field to carry mode requests");
            if (!module.primary_switcher())
                throw NoSwitcher("firmware declares no mode-switcher");
            break;
        case MissionStep::Kind::Input: {
            const TypeDesc* f = in ? in->field_type(s.name) : nullptr;
            if (!f || !f->is_scalar_int() || s.name == kModeRequestField)
                throw DomainError("mission '" + mission.name + "' sets unknown input '" + s.name + "'");
            break;
        }
        case MissionStep::Kind::Hijack:
        case MissionStep::Kind::CorruptReturn:
            if (!module.find(s.name))
                throw UnknownFunction("mission '" + mission.name + "' targets unknown function '" + s.name + "'");
            if (s.value < 0)
                throw DomainError("call index must be >= 0");
            break;
        case MissionStep::Kind::Wait:
            if (s.value < 0)
                throw DomainError("wait count must be >= 0");
            break;
        }
    }
}

} // namespace modeguard
