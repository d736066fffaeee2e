#include <random>

#include "oracles.hpp"

namespace oracle {

using namespace modeguard;

namespace {

TypeDesc t_void() { return TypeDesc::void_type(); }
TypeDesc t_int() { return TypeDesc::int_type(); }
TypeDesc t0() { return TypeDesc::func_ref(Signature{{}, t_void()}); }
TypeDesc t1() { return TypeDesc::func_ref(Signature{{t_int()}, t_int()}); }

struct Gen {
    std::mt19937_64 rng;
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng() % n); }
    template <class T>
    const T& one_of(const std::vector<T>& v) { return v[pick(v.size())]; }
};

std::vector<std::string> vars_of(const FunctionDef& f, const TypeDesc& t) {
    std::vector<std::string> out;
    for (const auto& p : f.params)
        if (p.type == t)
            out.push_back(p.name);
    for (const auto& [n, ty] : f.locals)
        if (ty == t)
            out.push_back(n);
    return out;
}

std::vector<std::string> ref_vars(const FunctionDef& f) {
    std::vector<std::string> out;
    for (const auto& p : f.params)
        if (p.type.is_func_ref())
            out.push_back(p.name);
    for (const auto& [n, ty] : f.locals)
        if (ty.is_func_ref())
            out.push_back(n);
    return out;
}

} // namespace

FirmwareModule random_module(std::uint64_t seed, const RandomModuleLimits& limits) {
    Gen g{std::mt19937_64(seed)};
    FirmwareModule m;
    m.entry = "main";
    m.records.emplace("R", TypeDesc::record("R", {{"h", t0()}, {"k", t1()}}));
    m.globals.emplace("g", "R");

    const std::vector<Signature> sigs = {
        {{}, t_void()}, {{t_int()}, t_int()}, {{t0()}, t0()}, {{}, t0()}, {{t0(), t1()}, t_void()}};

    std::size_t nfn = 3 + g.pick(4);
    std::vector<std::string> names{"main"};
    for (std::size_t k = 1; k < nfn; ++k)
        names.push_back("f" + std::to_string(k));

    for (std::size_t k = 0; k < nfn; ++k) {
        FunctionDef f;
        f.name = names[k];
        const Signature& s = k == 0 ? sigs[0] : g.one_of(sigs);
        for (std::size_t p = 0; p < s.params.size(); ++p)
            f.params.push_back({"a" + std::to_string(p), s.params[p]});
        f.result = s.result;
        for (const char* v : {"p0", "p1", "p2"})
            f.locals.emplace(v, t0());
        for (const char* v : {"q0", "q1"})
            f.locals.emplace(v, t1());
        f.locals.emplace("n0", t_int());
        m.functions.emplace(f.name, std::move(f));
    }

    int budget = limits.max_instructions - static_cast<int>(nfn);
    int addr_of = 0;
    for (int n = 0; n < budget; ++n) {
        FunctionDef& f = m.functions.at(g.one_of(names));
        auto refs = ref_vars(f);
        auto zeros = vars_of(f, t0());
        auto ones = vars_of(f, t1());
        switch (g.pick(8)) {
        case 0:
        case 1:
            if (addr_of < limits.max_addr_of) {
                f.body.push_back(Instruction::addr_of(g.one_of(refs), g.one_of(names)));
                ++addr_of;
                break;
            }
            [[fallthrough]];
        case 2: f.body.push_back(Instruction::assign(g.one_of(refs), g.one_of(refs))); break;
        case 3: f.body.push_back(Instruction::field_store("g", g.pick(2) ? "h" : "k", g.one_of(refs))); break;
        case 4: f.body.push_back(Instruction::field_load(g.one_of(refs), "g", g.pick(2) ? "h" : "k")); break;
        case 5: {
            const FunctionDef& callee = m.functions.at(g.one_of(names));
            std::vector<std::string> args;
            for (const auto& p : callee.params)
                args.push_back(p.type.is_func_ref() ? g.one_of(refs) : "n0");
            std::string dst;
            if (callee.result.is_func_ref())
                dst = g.one_of(refs);
            else if (!callee.result.is_void())
                dst = "n0";
            f.body.push_back(Instruction::call(callee.name, args, dst));
            break;
        }
        case 6: f.body.push_back(Instruction::icall(g.one_of(zeros), {}, Signature{{}, t_void()})); break;
        default:
            f.body.push_back(Instruction::icall(g.one_of(ones), {"n0"}, Signature{{t_int()}, t_int()}, "n0"));
            break;
        }
    }
    for (auto& [name, f] : m.functions) {
        if (f.result.is_void())
            f.body.push_back(Instruction::ret());
        else if (f.result.is_func_ref())
            f.body.push_back(Instruction::ret(g.one_of(vars_of(f, t0()))));
        else
            f.body.push_back(Instruction::ret("n0"));
    }
    return m;
}

} // namespace oracle
