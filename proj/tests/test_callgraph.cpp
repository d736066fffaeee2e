#include <gtest/gtest.h>

#include <cmath>

#include "modeguard/callgraph.hpp"
#include "modeguard/missiongen.hpp"
#include "modeguard/runtime.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace modeguard;

namespace {

oracle::EdgeSet to_oracle(const CallGraph& cg) {
    oracle::EdgeSet out;
    for (const auto& e : cg.edges)
        out.emplace(e.caller, e.site.index, e.callee, e.kind == CallEdge::Kind::Indirect);
    return out;
}

CallGraph graph_of(const FirmwareModule& m) { return build_callgraph(m, solve_andersen(m)); }

std::set<std::pair<std::string, std::string>> pairs(const CallGraph& cg) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& e : cg.edges)
        out.emplace(e.caller, e.callee);
    return out;
}

const char* kSignatureSite = R"(fn F(%x: int) -> int {
  ret %x
}
fn G(%x: int, %y: int) -> int {
  ret %x
}
fn H(%x: int) {
  ret
}
fn main() {
  var %p : fnref(int)->int
  var %a : int
  var %r : int
  %a = const 1
  %p = addrof F
  %p = addrof G
  %p = addrof H
  %r = icall %p(%a) : (int)->int
  ret
}
)";

} // namespace

TEST(CallGraph, DirectOnly) {
    auto m = parse_firmware("fn g() {\n  ret\n}\nfn f() {\n  call g()\n  ret\n}\nfn main() {\n  call f()\n  ret\n}\n");
    auto cg = graph_of(m);
    EXPECT_EQ(pairs(cg), (std::set<std::pair<std::string, std::string>>{{"main", "f"}, {"f", "g"}}));
    for (const auto& e : cg.edges)
        EXPECT_EQ(e.kind, CallEdge::Kind::Direct);
    EXPECT_EQ(cg.nodes, (std::set<std::string>{"f", "g", "main"}));
    EXPECT_EQ(cg.indirect_edge_count(), 0u);
}

TEST(CallGraph, OneIndirectEdgePerTarget) {
    auto m = parse_firmware("fn F() {\n  ret\n}\nfn G() {\n  ret\n}\nfn main() {\n  var %p : fnref()->void\n"
                            "  %p = addrof F\n  %p = addrof G\n  icall %p() : ()->void\n  ret\n}\n");
    auto cg = graph_of(m);
    ASSERT_EQ(cg.edges.size(), 2u);
    for (const auto& e : cg.edges) {
        EXPECT_EQ(e.kind, CallEdge::Kind::Indirect);
        EXPECT_EQ(e.site, (CallSite{"main", 2}));
    }
}

TEST(CallGraph, ToycopterMatchesEnumeration) {
    for (const FirmwareModule* m : {&testutil::toycopter(), &testutil::toyrover()}) {
        auto cg = graph_of(*m);
        EXPECT_EQ(to_oracle(cg), oracle::enumerate_edges(*m, oracle::andersen(*m)));
        for (const auto& e : cg.edges) {
            EXPECT_TRUE(cg.nodes.count(e.caller));
            EXPECT_TRUE(cg.nodes.count(e.callee));
        }
        EXPECT_EQ(cg.nodes.size(), m->functions.size());
    }
}

TEST(CallGraph, InvalidModuleRejected) {
    FirmwareModule m = testutil::toycopter();
    m.entry = "ghost";
    EXPECT_THROW(build_callgraph(m, PointsToResult{}), InvalidModule);
}

TEST(SignaturePruning, ArityAndVoidResult) {
    auto m = parse_firmware(kSignatureSite);
    auto cg = graph_of(m);
    EXPECT_EQ(cg.indirect_edge_count(), 3u);
    auto pruned = prune_signature(cg, m);
    std::set<std::string> callees;
    for (const auto& e : pruned.edges)
        callees.insert(e.callee);
    EXPECT_EQ(callees, (std::set<std::string>{"F"}));
    EXPECT_EQ(pruned.nodes, cg.nodes);
}

TEST(SignaturePruning, VoidCalleeKeptWhenResultUnused) {
    auto m = parse_firmware("fn H(%x: int) {\n  ret\n}\nfn main() {\n  var %p : fnref(int)->int\n  var %a : int\n"
                            "  %a = const 1\n  %p = addrof H\n  icall %p(%a) : (int)->int\n  ret\n}\n");
    EXPECT_EQ(prune_signature(graph_of(m), m).indirect_edge_count(), 1u);
}

TEST(SignaturePruning, ParameterTypesCompareExactly) {
    auto m = parse_firmware("fn B(%x: bool) -> int {\n  var %r : int\n  %r = const 0\n  ret %r\n}\n"
                            "fn main() {\n  var %p : fnref(int)->int\n  var %a : int\n  var %r : int\n"
                            "  %a = const 1\n  %p = addrof B\n  %r = icall %p(%a) : (int)->int\n  ret\n}\n");
    EXPECT_EQ(prune_signature(graph_of(m), m).indirect_edge_count(), 0u);
}

TEST(SignaturePruning, ToycopterMatchesFilterOracle) {
    const auto& m = testutil::toycopter();
    auto cg = graph_of(m);
    auto sig = prune_signature(cg, m);
    EXPECT_EQ(to_oracle(sig), oracle::signature_filter(m, to_oracle(cg)));
    EXPECT_LT(sig.edges.size(), cg.edges.size());
    // direct edges survive untouched
    std::size_t direct_before = cg.edges.size() - cg.indirect_edge_count();
    std::size_t direct_after = sig.edges.size() - sig.indirect_edge_count();
    EXPECT_EQ(direct_before, direct_after);
}

TEST(AddressPruning, DeadHolderRemovesEdges) {
    auto m = parse_firmware(R"(record R { h: fnref()->void }
global %g : R
fn F() {
  ret
}
fn D() {
  var %p : fnref()->void
  %p = addrof F
  %g.h = %p
  ret
}
fn main() {
  var %q : fnref()->void
  %q = %g.h
  icall %q() : ()->void
  ret
}
)");
    auto cg = graph_of(m);
    EXPECT_EQ(cg.indirect_edge_count(), 1u);
    EXPECT_EQ(prune_address_taken(cg, m).indirect_edge_count(), 0u);
}

TEST(AddressPruning, AddressTakenInEntryKept) {
    auto m = parse_firmware("fn F() {\n  ret\n}\nfn main() {\n  var %p : fnref()->void\n  %p = addrof F\n"
                            "  icall %p() : ()->void\n  ret\n}\n");
    auto cg = graph_of(m);
    EXPECT_EQ(prune_address_taken(cg, m), cg);
}

TEST(AddressPruning, ToycopterNeedsTwoRounds) {
    const auto& m = testutil::toycopter();
    auto sig = prune_signature(graph_of(m), m);
    std::size_t rounds = 0;
    auto fix = prune_address_taken(sig, m, AddressPruning::Fixpoint, &rounds);
    EXPECT_EQ(rounds, 2u);
    int oracle_rounds = 0;
    EXPECT_EQ(to_oracle(fix), oracle::address_filter(m, to_oracle(sig), false, &oracle_rounds));
    EXPECT_EQ(oracle_rounds, 2);

    std::size_t single_rounds = 0;
    auto once = prune_address_taken(sig, m, AddressPruning::SinglePass, &single_rounds);
    EXPECT_EQ(single_rounds, 1u);
    EXPECT_EQ(to_oracle(once), oracle::address_filter(m, to_oracle(sig), true));
    EXPECT_GT(once.edges.size(), fix.edges.size());
    // legacy_helper loses its edge only in the second round
    bool helper_once = false, helper_fix = false;
    for (const auto& e : once.edges)
        helper_once = helper_once || e.callee == "legacy_helper";
    for (const auto& e : fix.edges)
        helper_fix = helper_fix || e.callee == "legacy_helper";
    EXPECT_TRUE(helper_once);
    EXPECT_FALSE(helper_fix);
}

TEST(AddressPruning, IdempotentAndOrdered) {
    for (const FirmwareModule* m : {&testutil::toycopter(), &testutil::toyrover()}) {
        auto st = analyze_callgraph(*m);
        EXPECT_EQ(prune_address_taken(st.address, *m), st.address);
        for (const auto& e : st.address.edges)
            EXPECT_TRUE(st.signature.edges.count(e));
        for (const auto& e : st.signature.edges)
            EXPECT_TRUE(st.original.edges.count(e));
        EXPECT_EQ(st.original.nodes, st.address.nodes);
    }
}

TEST(AddressPruning, RandomModulesMatchOracle) {
    for (std::uint64_t seed = 300; seed < 400; ++seed) {
        auto m = oracle::random_module(seed);
        auto cg = graph_of(m);
        auto sig = prune_signature(cg, m);
        ASSERT_EQ(to_oracle(cg), oracle::enumerate_edges(m, oracle::andersen(m))) << seed;
        ASSERT_EQ(to_oracle(sig), oracle::signature_filter(m, to_oracle(cg))) << seed;
        ASSERT_EQ(to_oracle(prune_address_taken(sig, m)), oracle::address_filter(m, to_oracle(sig))) << seed;
        ASSERT_EQ(to_oracle(prune_address_taken(sig, m, AddressPruning::SinglePass)),
                  oracle::address_filter(m, to_oracle(sig), true))
            << seed;
    }
}

// No indirect edge that a benign run actually takes is ever pruned.
TEST(AddressPruning, SoundAgainstExecution) {
    for (const FirmwareModule* m : {&testutil::toycopter(), &testutil::toyrover()}) {
        auto st = analyze_callgraph(*m);
        std::set<std::tuple<std::string, std::size_t, std::string>> kept;
        for (const auto& e : st.address.edges)
            kept.emplace(e.caller, e.site.index, e.callee);
        for (const auto& mission : gen_missions(*m, 40, 1))
            for (const auto& t : run_mission(*m, mission).indirect_edges)
                EXPECT_TRUE(kept.count({t.site.function, t.site.index, t.callee}))
                    << t.site.to_string() << " -> " << t.callee;
    }
}

TEST(Precision, TableValues) {
    EXPECT_NEAR(precision(104000, 66800), 0.3577, 1e-4);
    EXPECT_NEAR(precision(115300, 60100), 0.4787, 1e-4);
    EXPECT_EQ(precision(17, 17), 0.0);
}

TEST(Precision, DomainErrors) {
    EXPECT_THROW(precision(0, 0), DomainError);
    EXPECT_THROW(precision(5, 6), DomainError);
}

TEST(Precision, StatsLineFormat) {
    auto st = analyze_callgraph(testutil::toycopter());
    std::string line = format_callgraph_stats(st);
    double p = precision(st.original.edges.size(), st.address.edges.size());
    std::string expect = "edges_original=" + std::to_string(st.original.edges.size()) +
                         " edges_sig=" + std::to_string(st.signature.edges.size()) +
                         " edges_addr=" + std::to_string(st.address.edges.size()) +
                         " precision=" + std::to_string(std::lround(p * 100)) + "%";
    EXPECT_EQ(line, expect);
    EXPECT_GT(p, 0.0);
}

TEST(CallGraph, DotOutputListsEdges) {
    auto m = parse_firmware("fn f() {\n  ret\n}\nfn main() {\n  call f()\n  ret\n}\n");
    std::string dot = to_dot(graph_of(m));
    EXPECT_EQ(dot.rfind("digraph", 0), 0u);
    EXPECT_NE(dot.find("\"main\" -> \"f\""), std::string::npos);
}

TEST(CallGraph, Deterministic) {
    EXPECT_EQ(analyze_callgraph(testutil::toycopter()).address, analyze_callgraph(testutil::toycopter()).address);
}

TEST(CallGraph, ReachableFrom) {
    auto st = analyze_callgraph(testutil::toycopter());
    auto r = reachable_from(st.address, {"main"});
    EXPECT_TRUE(r.count("fast_loop"));
    EXPECT_FALSE(r.count("legacy_init"));
}
