#pragma once

// Inclusion-based (Andersen-style) points-to analysis over firmware IR.
//
// The analysis is field-sensitive on the fields of global records and
// flow-, context- and path-insensitive. Indirect calls are resolved on the
// fly: whenever a function object reaches the reference operand of an
// indirect call, argument/parameter and return/result inclusion edges for
// that callee are added to the constraint graph.

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>

#include "modeguard/ir.hpp"

namespace modeguard {

struct AbstractLocation {
    enum class Kind { Var, Global, Field, FuncObj };

    Kind kind = Kind::Var;
    std::string scope; // function for Var, global for Field
    std::string name;  // var, global, field or function name

    static AbstractLocation var(std::string fn, std::string v) { return {Kind::Var, std::move(fn), std::move(v)}; }
    static AbstractLocation global(std::string g) { return {Kind::Global, {}, std::move(g)}; }
    static AbstractLocation field(std::string g, std::string f) { return {Kind::Field, std::move(g), std::move(f)}; }
    static AbstractLocation func_obj(std::string fn) { return {Kind::FuncObj, {}, std::move(fn)}; }

    /// `main::%fp`, `%g`, `%g.f`, `&F`
    std::string to_string() const;

    friend auto operator<=>(const AbstractLocation&, const AbstractLocation&) = default;
};

using FunctionSet = std::set<std::string>;

struct PointsToResult {
    /// Only locations with a non-empty set are stored.
    std::map<AbstractLocation, FunctionSet> pts;
    /// Worklist pops needed to reach the fixpoint.
    std::size_t iterations = 0;
    /// Upper bound |locations| x |functions| the solver is checked against.
    std::size_t iteration_bound = 0;
};

/// Least fixpoint of the inclusion constraints. Throws InvalidModule.
PointsToResult solve_andersen(const FirmwareModule& module);

/// Stored set for `loc`, empty for unknown locations and function objects.
const FunctionSet& pts_of(const PointsToResult& result, const AbstractLocation& loc);

/// `loc -> {F,G}` lines sorted lexicographically.
std::string dump_points_to(const PointsToResult& result);

/// Throws InvalidModule if validate() reports anything.
void require_valid(const FirmwareModule& module);

} // namespace modeguard
