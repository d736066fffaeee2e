#include <gtest/gtest.h>

#include <functional>

#include "modeguard/ir.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace modeguard;

namespace {

bool has_invariant(const std::vector<Diagnostic>& diags, const std::string& inv) {
    for (const auto& d : diags)
        if (d.invariant == inv)
            return true;
    return false;
}

const char* kSmallSwitcher = R"(modes GUIDED,RTL,FAILSAFE
modeid 1 GUIDED
modeid 2 RTL
modeid 3 FAILSAFE
switcher set_mode
entry main

fn main() {
  var %m : int
  var %ok : bool
  %m = const 1
  %ok = call set_mode(%m)
  ret
}

fn set_mode(%m: int) -> bool {
  var %ok : bool
  setmode %m
  %ok = const 1
  ret %ok
}
)";

} // namespace

TEST(Parse, MinimalModule) {
    FirmwareModule m = parse_firmware("fn main() {\n  ret\n}\n");
    ASSERT_EQ(m.functions.size(), 1u);
    EXPECT_TRUE(m.functions.count("main"));
    EXPECT_EQ(m.entry, "main");
    EXPECT_TRUE(m.mode_names.empty());
    EXPECT_TRUE(validate(m).empty());
}

TEST(Parse, ModeHeaderAndSwitcher) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    EXPECT_EQ(m.mode_names, (std::vector<std::string>{"GUIDED", "RTL", "FAILSAFE"}));
    EXPECT_EQ(m.mode_switchers, (std::set<std::string>{"set_mode"}));
    EXPECT_TRUE(m.at("set_mode").is_mode_switcher);
    EXPECT_FALSE(m.at("main").is_mode_switcher);
    EXPECT_EQ(m.mode_id("RTL"), 2);
    EXPECT_EQ(m.primary_switcher()->name, "set_mode");
}

TEST(Parse, IndirectCallThroughIntIsTypeError) {
    const char* text = "fn main() {\n  var %fp : int\n  %fp = const 0\n  call_indirect %fp()\n  ret\n}\n";
    try {
        parse_firmware(text);
        FAIL() << "expected TypeError";
    } catch (const TypeError& e) {
        ASSERT_FALSE(e.diagnostics().empty());
        EXPECT_EQ(e.diagnostics().front().line, 4);
        EXPECT_EQ(e.diagnostics().front().invariant, "icall-ref-type");
    }
}

TEST(Parse, LongIndirectSpellingTakesSignatureFromReference) {
    const char* text = "fn f() {\n  ret\n}\nfn main() {\n  var %fp : fnref()->void\n  %fp = addrof f\n"
                       "  call_indirect %fp()\n  ret\n}\n";
    FirmwareModule m = parse_firmware(text);
    const auto& i = m.at("main").body[1];
    EXPECT_EQ(i.op, Opcode::CallIndirect);
    ASSERT_TRUE(i.declared);
    EXPECT_EQ(i.declared->to_string(), "()->void");
    EXPECT_NE(serialize_firmware(m).find("icall %fp() : ()->void"), std::string::npos);
}

TEST(Parse, SyntaxErrorCarriesPosition) {
    try {
        parse_firmware("fn main() {\n  %x = = 3\n  ret\n}\n");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        ASSERT_EQ(e.diagnostics().size(), 1u);
        EXPECT_EQ(e.diagnostics()[0].line, 2);
        EXPECT_GT(e.diagnostics()[0].column, 0);
    }
}

TEST(Parse, UnknownCalleeIsResolutionError) {
    EXPECT_THROW(parse_firmware("fn main() {\n  call nowhere()\n  ret\n}\n"), ResolutionError);
}

TEST(Parse, UnknownLabelIsResolutionError) {
    EXPECT_THROW(parse_firmware("fn main() {\n  goto nowhere\n  ret\n}\n"), ResolutionError);
}

TEST(Parse, UndeclaredVariableIsResolutionError) {
    EXPECT_THROW(parse_firmware("fn main() {\n  %x = const 1\n  ret\n}\n"), ResolutionError);
}

TEST(Parse, UnknownAddrOfTargetIsResolutionError) {
    EXPECT_THROW(parse_firmware("fn main() {\n  var %p : fnref()->void\n  %p = addrof ghost\n  ret\n}\n"),
                 ResolutionError);
}

TEST(Parse, DeterministicAndDiagnosticsFormatted) {
    auto a = parse_firmware(testutil::read_file(testutil::corpus("toycopter.fir")));
    auto b = parse_firmware(testutil::read_file(testutil::corpus("toycopter.fir")));
    EXPECT_EQ(a, b);
    Diagnostic d{Diagnostic::Category::Type, 3, 5, "x", "boom"};
    EXPECT_NE(d.to_string().find("3"), std::string::npos);
    EXPECT_NE(d.to_string().find("boom"), std::string::npos);
}

TEST(Parse, LoadMissingFileFails) {
    EXPECT_THROW(load_firmware("/nonexistent/none.fir"), Error);
}

TEST(Validate, CorpusModulesAreClean) {
    EXPECT_TRUE(validate(testutil::toycopter()).empty());
    EXPECT_TRUE(validate(testutil::toyrover()).empty());
    EXPECT_GE(testutil::toycopter().functions.size(), 12u);
    for (auto name : {"disarm_motors", "output_min", "disarm"})
        EXPECT_TRUE(testutil::toycopter().find(name)) << name;
    for (auto mode : {"GUIDED", "RTL", "LAND", "FAILSAFE"})
        EXPECT_TRUE(testutil::toycopter().has_mode(mode)) << mode;
}

TEST(Validate, EntryMustNotBeSwitcher) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    m.entry = "set_mode";
    auto diags = validate(m);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].invariant, "entry-not-switcher");
    EXPECT_NE(diags[0].message.find("entry must not be a mode-switcher"), std::string::npos);
}

TEST(Validate, FallThroughWithoutReturnNamesFunction) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    auto& body = m.functions.at("main").body;
    body.pop_back(); // drop the final ret
    auto diags = validate(m);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].invariant, "path-ends-in-ret");
    EXPECT_NE(diags[0].message.find("main"), std::string::npos);
}

TEST(Validate, ConditionalPathWithoutReturn) {
    const char* text = "fn main() {\n  var %c : bool\n  %c = const 1\n  ifgoto %c out\n  ret\nlabel out\n"
                       "  effect x()\n}\n";
    EXPECT_THROW(parse_firmware(text), TypeError);
}

TEST(Validate, SwitcherWithoutSetModeAndSetModeOutsideSwitcher) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    auto& sw = m.functions.at("set_mode").body;
    sw.erase(sw.begin());
    EXPECT_TRUE(has_invariant(validate(m), "switcher-setmode"));

    FirmwareModule n = parse_firmware(kSmallSwitcher);
    auto& mb = n.functions.at("main").body;
    mb.insert(mb.begin() + 1, Instruction::set_mode("m"));
    EXPECT_TRUE(has_invariant(validate(n), "switcher-setmode"));
}

TEST(Validate, ModeIdsMustBeBijection) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    m.mode_ids[7] = "RTL";
    EXPECT_TRUE(has_invariant(validate(m), "modeid-bijection"));
    FirmwareModule n = parse_firmware(kSmallSwitcher);
    n.mode_ids[9] = "NOPE";
    EXPECT_TRUE(has_invariant(validate(n), "modeid-bijection"));
}

TEST(Validate, ModeNamesUpperUniqueAndNotBoot) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    m.mode_names.push_back("lower");
    m.mode_ids[10] = "lower";
    EXPECT_TRUE(has_invariant(validate(m), "mode-name-upper"));
    FirmwareModule n = parse_firmware(kSmallSwitcher);
    n.mode_names.push_back("RTL");
    EXPECT_TRUE(has_invariant(validate(n), "mode-name-unique"));
    FirmwareModule b = parse_firmware(kSmallSwitcher);
    b.mode_names.push_back("INIT");
    b.mode_ids[11] = "INIT";
    EXPECT_TRUE(has_invariant(validate(b), "mode-name-reserved"));
}

TEST(Validate, SwitcherSetMembership) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    m.mode_switchers.insert("ghost");
    EXPECT_TRUE(has_invariant(validate(m), "switcher-defined"));
    FirmwareModule n = parse_firmware(kSmallSwitcher);
    n.mode_switchers.clear();
    EXPECT_TRUE(has_invariant(validate(n), "switcher-flag"));
}

TEST(Validate, IndirectSignatureMustMatchReference) {
    FirmwareModule m = parse_firmware(
        "fn f() {\n  ret\n}\nfn main() {\n  var %p : fnref()->void\n  %p = addrof f\n"
        "  icall %p() : ()->void\n  ret\n}\n");
    m.functions.at("main").body[1].declared = Signature{{TypeDesc::int_type()}, TypeDesc::void_type()};
    EXPECT_TRUE(has_invariant(validate(m), "icall-ref-type"));
}

TEST(Serialize, RoundTripToycopter) {
    const auto& m = testutil::toycopter();
    std::string text = serialize_firmware(m);
    FirmwareModule back = parse_firmware(text);
    EXPECT_EQ(back, m);
    EXPECT_EQ(serialize_firmware(back), text);
}

TEST(Serialize, RoundTripRover) {
    const auto& m = testutil::toyrover();
    EXPECT_EQ(parse_firmware(serialize_firmware(m)), m);
}

TEST(Serialize, EmptyBodyIsInvalidModule) {
    FirmwareModule m = parse_firmware(kSmallSwitcher);
    m.functions.at("main").body.clear();
    try {
        serialize_firmware(m);
        FAIL() << "expected InvalidModule";
    } catch (const InvalidModule& e) {
        EXPECT_TRUE(has_invariant(e.diagnostics(), "non-empty-body"));
    }
}

TEST(Serialize, RoundTripRandomModules) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        FirmwareModule m = oracle::random_module(seed);
        ASSERT_TRUE(validate(m).empty()) << "seed " << seed;
        EXPECT_EQ(parse_firmware(serialize_firmware(m)), m) << "seed " << seed;
    }
}

// Breaking any single invariant of a valid module must be reported.
TEST(Validate, SingleFieldMutationsAreDetected) {
    const FirmwareModule base = testutil::toycopter();
    std::vector<std::pair<std::string, std::function<void(FirmwareModule&)>>> mutations = {
        {"entry missing", [](FirmwareModule& m) { m.entry = "ghost"; }},
        {"entry switcher", [](FirmwareModule& m) { m.entry = "set_mode"; }},
        {"addrof unknown", [](FirmwareModule& m) { m.functions.at("main").body[1].symbol = "ghost"; }},
        {"label unknown",
         [](FirmwareModule& m) {
             for (auto& i : m.functions.at("main").body)
                 if (i.op == Opcode::CondGoto)
                     i.symbol = "nowhere";
         }},
        {"var undeclared", [](FirmwareModule& m) { m.functions.at("main").body[1].dst = "nope"; }},
        {"ret dropped", [](FirmwareModule& m) { m.functions.at("disarm").body.pop_back(); }},
        {"ret value on void", [](FirmwareModule& m) { m.functions.at("disarm").body.back().src = "x"; }},
        {"empty body", [](FirmwareModule& m) { m.functions.at("lowpass").body.clear(); }},
        {"duplicate mode", [](FirmwareModule& m) { m.mode_names.push_back("RTL"); }},
        {"mode without id", [](FirmwareModule& m) { m.mode_ids.erase(m.mode_ids.begin()); }},
        {"switcher unflagged", [](FirmwareModule& m) { m.functions.at("set_mode").is_mode_switcher = false; }},
        {"icall signature",
         [](FirmwareModule& m) {
             for (auto& i : m.functions.at("main").body)
                 if (i.op == Opcode::CallIndirect)
                     i.declared = Signature{{TypeDesc::int_type()}, TypeDesc::void_type()};
         }},
        {"call arity",
         [](FirmwareModule& m) {
             for (auto& i : m.functions.at("main").body)
                 if (i.op == Opcode::CallDirect)
                     i.args.clear();
         }},
        {"unknown global",
         [](FirmwareModule& m) {
             for (auto& i : m.functions.at("main").body)
                 if (i.op == Opcode::FieldStore)
                     i.base = "ghost";
         }},
        {"marker outside instrumentation", [](FirmwareModule& m) {
             auto& b = m.functions.at("main").body;
             b.insert(b.begin(), Instruction::mode_entry("zero"));
         }}};
    for (const auto& [what, mutate] : mutations) {
        FirmwareModule m = base;
        mutate(m);
        EXPECT_FALSE(validate(m).empty()) << what;
    }
}
