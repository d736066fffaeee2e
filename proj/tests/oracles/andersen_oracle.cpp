#include "oracles.hpp"

namespace oracle {

using modeguard::AbstractLocation;
using modeguard::Opcode;

namespace {

using Pts = std::map<AbstractLocation, std::set<std::string>>;

bool add_all(Pts& pts, const AbstractLocation& to, const std::set<std::string>& from) {
    bool changed = false;
    for (const auto& f : from)
        changed |= pts[to].insert(f).second;
    return changed;
}

std::set<std::string> get(const Pts& pts, const AbstractLocation& loc) {
    auto it = pts.find(loc);
    return it == pts.end() ? std::set<std::string>{} : it->second;
}

// pts(arg_i) into pts(param_i), pts(ret values) into pts(dst).
bool bind(Pts& pts, const FirmwareModule& m, const std::string& caller, const modeguard::Instruction& i,
          const std::string& callee) {
    bool changed = false;
    const auto& def = m.functions.at(callee);
    for (std::size_t k = 0; k < i.args.size() && k < def.params.size(); ++k)
        changed |= add_all(pts, AbstractLocation::var(callee, def.params[k].name),
                           get(pts, AbstractLocation::var(caller, i.args[k])));
    if (!i.dst.empty())
        for (const auto& r : def.body)
            if ((r.op == Opcode::Return || r.op == Opcode::MonitoredReturn) && !r.src.empty())
                changed |= add_all(pts, AbstractLocation::var(caller, i.dst), get(pts, AbstractLocation::var(callee, r.src)));
    return changed;
}

} // namespace

std::map<AbstractLocation, std::set<std::string>> andersen(const FirmwareModule& m) {
    Pts pts;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [fn, def] : m.functions) {
            for (const auto& i : def.body) {
                auto v = [&](const std::string& name) { return AbstractLocation::var(fn, name); };
                switch (i.op) {
                case Opcode::AddrOf: changed |= pts[v(i.dst)].insert(i.symbol).second; break;
                case Opcode::Assign: changed |= add_all(pts, v(i.dst), get(pts, v(i.src))); break;
                case Opcode::FieldStore:
                    changed |= add_all(pts, AbstractLocation::field(i.base, i.symbol), get(pts, v(i.src)));
                    break;
                case Opcode::FieldLoad:
                    changed |= add_all(pts, v(i.dst), get(pts, AbstractLocation::field(i.base, i.symbol)));
                    break;
                case Opcode::CallDirect: changed |= bind(pts, m, fn, i, i.symbol); break;
                case Opcode::CallIndirect:
                case Opcode::MonitoredCall:
                    for (const auto& target : get(pts, v(i.src)))
                        changed |= bind(pts, m, fn, i, target);
                    break;
                default: break;
                }
            }
        }
    }
    std::erase_if(pts, [](const auto& kv) { return kv.second.empty(); });
    return pts;
}

} // namespace oracle
