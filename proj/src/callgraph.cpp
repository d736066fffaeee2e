#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include "modeguard/callgraph.hpp"

namespace modeguard {

std::size_t CallGraph::indirect_edge_count() const {
    std::size_t n = 0;
    for (const auto& e : edges)
        n += e.kind == CallEdge::Kind::Indirect;
    return n;
}

CallGraph build_callgraph(const FirmwareModule& module, const PointsToResult& pts) {
    require_valid(module);
    CallGraph cg;
    for (const auto& [name, fn] : module.functions) {
        cg.nodes.insert(name);
        for (std::size_t k = 0; k < fn.body.size(); ++k) {
            const Instruction& i = fn.body[k];
            CallSite site{name, k};
            if (i.op == Opcode::CallDirect) {
                cg.edges.insert({site, name, i.symbol, CallEdge::Kind::Direct});
            } else if (is_indirect_call(i.op)) {
                for (const auto& target : pts_of(pts, AbstractLocation::var(name, i.src)))
                    cg.edges.insert({site, name, target, CallEdge::Kind::Indirect});
            }
        }
    }
    return cg;
}

CallGraph prune_signature(const CallGraph& cg, const FirmwareModule& module) {
    CallGraph out;
    out.nodes = cg.nodes;
    for (const auto& e : cg.edges) {
        if (e.kind == CallEdge::Kind::Direct) {
            out.edges.insert(e);
            continue;
        }
        const Instruction& site = module.at(e.site.function).body.at(e.site.index);
        const FunctionDef& callee = module.at(e.callee);
        const Signature& declared = *site.declared;
        if (callee.params.size() != declared.params.size())
            continue;
        bool params_match = true;
        for (std::size_t k = 0; k < declared.params.size(); ++k)
            params_match = params_match && callee.params[k].type == declared.params[k];
        if (!params_match)
            continue;
        if (!site.dst.empty() && callee.result.is_void())
            continue;
        out.edges.insert(e);
    }
    return out;
}

std::set<std::string> reachable_from(const CallGraph& cg, const std::set<std::string>& roots) {
    std::map<std::string, std::set<std::string>> succ;
    for (const auto& e : cg.edges)
        succ[e.caller].insert(e.callee);
    std::set<std::string> seen;
    std::deque<std::string> work;
    for (const auto& r : roots)
        if (seen.insert(r).second)
            work.push_back(r);
    while (!work.empty()) {
        std::string f = std::move(work.front());
        work.pop_front();
        auto it = succ.find(f);
        if (it == succ.end())
            continue;
        for (const auto& g : it->second)
            if (seen.insert(g).second)
                work.push_back(g);
    }
    return seen;
}

CallGraph prune_address_taken(const CallGraph& cg, const FirmwareModule& module, AddressPruning mode,
                              std::size_t* rounds) {
    CallGraph cur = cg;
    std::size_t deleting_rounds = 0;
    for (;;) {
        std::set<std::string> reach = reachable_from(cur, {module.entry});
        std::set<std::string> taken;
        for (const auto& f : reach)
            for (const auto& i : module.at(f).body)
                if (i.op == Opcode::AddrOf)
                    taken.insert(i.symbol);
        std::size_t before = cur.edges.size();
        std::erase_if(cur.edges, [&](const CallEdge& e) {
            return e.kind == CallEdge::Kind::Indirect && !taken.count(e.callee);
        });
        if (cur.edges.size() == before)
            break;
        ++deleting_rounds;
        if (mode == AddressPruning::SinglePass)
            break;
    }
    if (rounds)
        *rounds = deleting_rounds;
    return cur;
}

CallGraphStages analyze_callgraph(const FirmwareModule& module) {
    CallGraphStages s;
    s.original = build_callgraph(module, solve_andersen(module));
    s.signature = prune_signature(s.original, module);
    s.address = prune_address_taken(s.signature, module);
    return s;
}

double precision(std::size_t original_edges, std::size_t pruned_edges) {
    if (original_edges == 0)
        throw DomainError("precision: original edge count is zero");
    if (pruned_edges > original_edges)
        throw DomainError("precision: pruned edge count exceeds original");
    return static_cast<double>(original_edges - pruned_edges) / static_cast<double>(original_edges);
}

std::string format_callgraph_stats(const CallGraphStages& stages) {
    std::size_t orig = stages.original.edges.size();
    std::size_t addr = stages.address.edges.size();
    std::ostringstream os;
    os << "edges_original=" << orig << " edges_sig=" << stages.signature.edges.size() << " edges_addr=" << addr
       << " precision=";
    if (orig == 0)
        os << "n/a";
    else
        os << std::lround(precision(orig, addr) * 100.0) << '%';
    return os.str();
}

std::string to_dot(const CallGraph& cg) {
    std::ostringstream os;
    os << "digraph callgraph {\n";
    for (const auto& n : cg.nodes)
        os << "  \"" << n << "\";\n";
    for (const auto& e : cg.edges) {
        os << "  \"" << e.caller << "\" -> \"" << e.callee << "\" [label=\"" << e.site.index << "\"";
        if (e.kind == CallEdge::Kind::Indirect)
            os << ", style=dashed";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace modeguard
