#pragma once

// Call graph construction from points-to facts, and the two pruning
// heuristics: signature matching and address-taken reachability.

#include <compare>
#include <cstddef>
#include <set>
#include <string>

#include "modeguard/ir.hpp"
#include "modeguard/pointsto.hpp"

namespace modeguard {

struct CallEdge {
    enum class Kind { Direct, Indirect };

    CallSite site;
    std::string caller;
    std::string callee;
    Kind kind = Kind::Direct;

    friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

struct CallGraph {
    std::set<std::string> nodes;
    std::set<CallEdge> edges; // ordered by site, then callee

    std::size_t indirect_edge_count() const;
    friend bool operator==(const CallGraph&, const CallGraph&) = default;
};

/// Direct edges plus one indirect edge per pts(ref) member at every indirect site.
CallGraph build_callgraph(const FirmwareModule& module, const PointsToResult& pts);

/// Drops indirect edges whose callee differs from the site's declared
/// signature in arity or parameter types, or returns void where the site
/// binds a result.
CallGraph prune_signature(const CallGraph& cg, const FirmwareModule& module);

enum class AddressPruning { Fixpoint, SinglePass };

/// Drops indirect edges to functions whose address is never taken inside a
/// function reachable from the entry. Reachability is recomputed over the
/// current graph until nothing changes (or once, for SinglePass). When
/// `rounds` is given it receives the number of deleting rounds.
CallGraph prune_address_taken(const CallGraph& cg, const FirmwareModule& module,
                              AddressPruning mode = AddressPruning::Fixpoint, std::size_t* rounds = nullptr);

/// pts -> build -> signature -> address-taken (fixpoint).
struct CallGraphStages {
    CallGraph original;
    CallGraph signature;
    CallGraph address;
};
CallGraphStages analyze_callgraph(const FirmwareModule& module);

/// Functions reachable from `roots` over every edge of `cg`.
std::set<std::string> reachable_from(const CallGraph& cg, const std::set<std::string>& roots);

/// (original - pruned) / original. Throws DomainError.
double precision(std::size_t original_edges, std::size_t pruned_edges);

/// `edges_original=N edges_sig=N edges_addr=N precision=P%`
std::string format_callgraph_stats(const CallGraphStages& stages);

std::string to_dot(const CallGraph& cg);

} // namespace modeguard
