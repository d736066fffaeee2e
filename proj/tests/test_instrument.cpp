#include <gtest/gtest.h>

#include "modeguard/instrument.hpp"
#include "modeguard/missiongen.hpp"
#include "modeguard/runtime.hpp"
#include "test_util.hpp"

using namespace modeguard;

namespace {

std::size_t count_op(const FunctionDef& fn, Opcode op) {
    std::size_t n = 0;
    for (const auto& i : fn.body)
        n += i.op == op;
    return n;
}

std::size_t count_op(const FirmwareModule& m, Opcode op) {
    std::size_t n = 0;
    for (const auto& [name, fn] : m.functions)
        n += count_op(fn, op);
    return n;
}

const char* kSmall = R"(modes A,B
modeid 1 A
modeid 2 B
switcher sw
entry main

fn sw(%m: int) -> bool {
  var %ok : bool
  var %one : int
  var %is : bool
  %ok = const 1
  %one = const 1
  %is = eq %m %one
  ifgoto %is first
  setmode %m
  ret %ok
label first
  setmode %m
  ret %ok
}

fn helper(%c: bool) -> int {
  var %r : int
  %r = const 0
  ifgoto %c other
  ret %r
label other
  %r = const 1
  ret %r
}

fn main() {
  var %m : int
  var %ok : bool
  var %c : bool
  var %v : int
  var %p : fnref()->void
  %m = const 1
  %ok = call sw(%m)
  %c = const 0
  %v = call helper(%c)
  %p = addrof tick
  icall %p() : ()->void
  ret
}

fn tick() {
  ret
}
)";

std::vector<EffectEvent> effects(const RunReport& r) { return r.effects; }

} // namespace

TEST(ProfilePass, CountsPerAlgorithm) {
    auto m = parse_firmware(kSmall);
    auto p = instrument_profile(m);
    EXPECT_EQ(count_op(p.at("sw"), Opcode::ModeEntry), 2u); // one per setmode success path
    EXPECT_EQ(count_op(p, Opcode::LogFn), 3u);              // helper, main, tick
    EXPECT_EQ(count_op(p.at("helper"), Opcode::LogFn), 1u);
    EXPECT_EQ(count_op(p.at("helper"), Opcode::ModeEntry), 0u);
    EXPECT_EQ(count_op(p.at("sw"), Opcode::LogFn), 0u);
    // log_fn first, mode_entry right after setmode
    EXPECT_EQ(p.at("main").body.front().op, Opcode::LogFn);
    EXPECT_EQ(p.at("main").body.front().symbol, "main");
    const auto& sw = p.at("sw").body;
    for (std::size_t k = 0; k < sw.size(); ++k)
        if (sw[k].op == Opcode::SetMode)
            EXPECT_EQ(sw[k + 1].op, Opcode::ModeEntry);
    // original instructions otherwise untouched
    EXPECT_EQ(count_op(p, Opcode::CallIndirect), count_op(m, Opcode::CallIndirect));
    EXPECT_EQ(count_op(p, Opcode::Return), count_op(m, Opcode::Return));
    EXPECT_TRUE(validate(p).empty());
}

TEST(ProfilePass, InputNotMutated) {
    auto m = parse_firmware(kSmall);
    auto copy = m;
    instrument_profile(m);
    instrument_guard(m);
    EXPECT_EQ(m, copy);
}

TEST(GuardPass, ReplacesIndirectTransfersOutsideSwitchers) {
    auto m = parse_firmware(kSmall);
    auto g = instrument_guard(m);
    EXPECT_EQ(count_op(g.at("main"), Opcode::MonitoredCall), 1u);
    EXPECT_EQ(count_op(g.at("main"), Opcode::MonitoredReturn), 1u);
    EXPECT_EQ(count_op(g.at("main"), Opcode::CallIndirect), 0u);
    EXPECT_EQ(count_op(g.at("main"), Opcode::Return), 0u);
    EXPECT_EQ(count_op(g.at("helper"), Opcode::MonitoredReturn), 2u);
    // direct calls untouched
    EXPECT_EQ(count_op(g.at("main"), Opcode::CallDirect), 2u);
    // switcher keeps raw returns and gains mode_entry
    EXPECT_EQ(count_op(g.at("sw"), Opcode::Return), 2u);
    EXPECT_EQ(count_op(g.at("sw"), Opcode::MonitoredReturn), 0u);
    EXPECT_EQ(count_op(g.at("sw"), Opcode::ModeEntry), 2u);
    EXPECT_EQ(count_op(g, Opcode::LogFn), 0u);
    EXPECT_TRUE(validate(g).empty());
}

TEST(GuardPass, SwitcherIndirectCallsUntouched) {
    auto m = parse_firmware(R"(modes A
modeid 1 A
switcher sw
fn t() {
  ret
}
fn sw(%m: int) {
  var %p : fnref()->void
  %p = addrof t
  setmode %m
  icall %p() : ()->void
  ret
}
fn main() {
  var %m : int
  %m = const 1
  call sw(%m)
  ret
}
)");
    auto g = instrument_guard(m);
    EXPECT_EQ(count_op(g.at("sw"), Opcode::CallIndirect), 1u);
    EXPECT_EQ(count_op(g.at("sw"), Opcode::MonitoredCall), 0u);
}

TEST(GuardPass, NoRawTransfersLeftInCorpus) {
    for (const FirmwareModule* m : {&testutil::toycopter(), &testutil::toyrover()}) {
        auto g = instrument_guard(*m);
        for (const auto& [name, fn] : g.functions) {
            if (fn.is_mode_switcher)
                continue;
            EXPECT_EQ(count_op(fn, Opcode::CallIndirect), 0u) << name;
            EXPECT_EQ(count_op(fn, Opcode::Return), 0u) << name;
        }
    }
}

TEST(GuardPass, MatchesGoldenFile) {
    std::string text = serialize_firmware(instrument_guard(testutil::toycopter()));
    EXPECT_EQ(text, testutil::read_file(testutil::golden("toycopter.guard.fir")));
    EXPECT_NE(text.find("mcall "), std::string::npos);
    EXPECT_NE(text.find("mret"), std::string::npos);
    EXPECT_EQ(parse_firmware(text), instrument_guard(testutil::toycopter()));
}

TEST(Instrument, Errors) {
    auto m = parse_firmware(kSmall);
    auto p = instrument_profile(m);
    EXPECT_THROW(instrument_profile(p), AlreadyInstrumented);
    EXPECT_THROW(instrument_guard(p), AlreadyInstrumented);
    EXPECT_THROW(instrument_guard(instrument_guard(m)), AlreadyInstrumented);

    auto plain = parse_firmware("fn main() {\n  ret\n}\n");
    EXPECT_THROW(instrument_profile(plain), NoSwitcher);
    EXPECT_THROW(instrument_guard(plain), NoSwitcher);

    auto broken = m;
    broken.functions.at("tick").body.clear();
    EXPECT_THROW(instrument_profile(broken), InvalidModule);
    EXPECT_THROW(instrument_guard(broken), InvalidModule);
}

TEST(Instrument, ProfiledTraceEqualsOriginal) {
    const auto& m = testutil::toycopter();
    auto p = instrument_profile(m);
    for (const auto& mission : gen_missions(m, 12, 3)) {
        auto a = run_mission(m, mission);
        auto b = run_mission(p, mission);
        EXPECT_EQ(effects(a), effects(b)) << mission.name;
        EXPECT_EQ(a.mode_transitions, b.mode_transitions) << mission.name;
        EXPECT_FALSE(b.per_mode_executed.empty());
    }
}

TEST(Instrument, GuardedPermitAllTraceEqualsOriginal) {
    const auto& m = testutil::toycopter();
    auto g = instrument_guard(m);
    RunOptions opt;
    opt.monitor = MonitorMode::PermitAll;
    for (const auto& mission : gen_missions(m, 12, 4)) {
        auto a = run_mission(m, mission);
        auto b = run_mission(g, mission, opt);
        EXPECT_EQ(effects(a), effects(b)) << mission.name;
        EXPECT_EQ(a.mode_transitions, b.mode_transitions) << mission.name;
        EXPECT_FALSE(b.fail_safe);
        EXPECT_EQ(b.shadow.mismatches, 0u);
    }
}
