#include <algorithm>
#include <sstream>

#include "modeguard/pointsto.hpp"
#include "modeguard/runtime.hpp"

namespace modeguard {
namespace {

constexpr std::int64_t kNullRef = -1;

struct CInstr {
    Opcode op = Opcode::Return;
    int dst = -1;
    int src = -1;
    int src2 = -1;
    int field = -1;  // global field slot
    int target = -1; // function id for calls/addrof/log_fn, body index for jumps
    std::vector<int> args;
    const Signature* declared = nullptr;
    const std::string* name = nullptr; // effect name
    std::int64_t imm = 0;
};

struct CFn {
    const FunctionDef* def = nullptr;
    Signature sig;
    bool switcher = false;
    std::vector<TypeDesc::Kind> slot_kinds;
    std::vector<CInstr> code;
};

struct Frame {
    int fn = -1;
    std::size_t pc = 0;
    std::vector<std::int64_t> slots;
    int ret_dst = -1;        // slot in the caller frame
    CallSite return_site;    // where control resumes in the caller
    bool indirect = false;   // entered through icall/mcall
    bool monitored = false;  // a shadow entry was pushed for this frame
    std::string set_mode_to; // switchers: mode written by setmode in this frame
};

std::int64_t default_value(TypeDesc::Kind k) { return k == TypeDesc::Kind::FuncRef ? kNullRef : 0; }

class Interpreter {
public:
    Interpreter(const FirmwareModule& m, const RunOptions& opt) : m_(m), opt_(opt) {
        require_valid(m);
        compile();
    }

    RunReport run(const MissionScript& mission) {
        validate_mission(mission, m_);
        if (opt_.monitor == MonitorMode::Enforce && !opt_.config)
            throw ConfigMissing("enforcing monitor needs a mode config");
        report_.mission = mission.name;
        report_.mode_transitions.push_back({0, "", std::string(kBootMode)});
        monitor_.permit_all = opt_.monitor == MonitorMode::PermitAll;
        if (opt_.monitor != MonitorMode::Off && opt_.config)
            monitor_ = monitor_mode_switch(std::move(monitor_), std::string(kBootMode), *opt_.config);

        for (const auto& step : mission.steps) {
            if (halted_)
                break;
            switch (step.kind) {
            case MissionStep::Kind::SetMode:
                globals_[input_field(std::string(kModeRequestField))] = *m_.mode_id(step.name);
                iterate();
                break;
            case MissionStep::Kind::Input:
                globals_[input_field(step.name)] = step.value;
                break;
            case MissionStep::Kind::Hijack:
                hijack_ = {fn_id(step.name), step.value};
                break;
            case MissionStep::Kind::CorruptReturn:
                corrupt_ = {fn_id(step.name), step.value};
                break;
            case MissionStep::Kind::Wait: {
                std::uint64_t start = tick_;
                while (!halted_ && tick_ - start < static_cast<std::uint64_t>(step.value))
                    iterate();
                break;
            }
            }
        }

        report_.violations = monitor_.violations;
        report_.shadow = monitor_.stats;
        report_.ticks = tick_;
        return std::move(report_);
    }

private:
    struct Armed {
        int fn = -1;
        std::int64_t remaining = -1;
        bool active() const { return fn >= 0; }
    };

    // ------------------------------------------------------------ compile

    void compile() {
        for (const auto& [name, fn] : m_.functions) {
            ids_.emplace(name, static_cast<int>(fns_.size()));
            fns_.emplace_back();
        }
        for (const auto& [g, rec] : m_.globals)
            for (const auto& f : m_.records.at(rec).fields()) {
                field_slots_.emplace(g + "." + f.name, static_cast<int>(globals_.size()));
                globals_.push_back(default_value(f.type.kind()));
                global_kinds_.push_back(f.type.kind());
            }
        for (const auto& [name, fn] : m_.functions)
            compile_fn(fns_[ids_.at(name)], fn);
        entry_ = ids_.at(m_.entry);
        if (const FunctionDef* s = m_.primary_switcher())
            switcher_ = ids_.at(s->name);
    }

    void compile_fn(CFn& c, const FunctionDef& fn) {
        c.def = &fn;
        c.sig = fn.signature();
        c.switcher = fn.is_mode_switcher;
        std::map<std::string, int> slot;
        for (const auto& p : fn.params) {
            slot.emplace(p.name, static_cast<int>(c.slot_kinds.size()));
            c.slot_kinds.push_back(p.type.kind());
        }
        for (const auto& [v, t] : fn.locals) {
            slot.emplace(v, static_cast<int>(c.slot_kinds.size()));
            c.slot_kinds.push_back(t.kind());
        }
        std::map<std::string, int> labels;
        for (std::size_t k = 0; k < fn.body.size(); ++k)
            if (fn.body[k].op == Opcode::Label)
                labels.emplace(fn.body[k].symbol, static_cast<int>(k));

        auto var = [&](const std::string& v) { return v.empty() ? -1 : slot.at(v); };
        for (const auto& i : fn.body) {
            CInstr ci;
            ci.op = i.op;
            ci.dst = var(i.dst);
            ci.src = var(i.src);
            ci.src2 = var(i.src2);
            ci.imm = i.imm;
            for (const auto& a : i.args)
                ci.args.push_back(var(a));
            if (i.declared)
                ci.declared = &*i.declared;
            switch (i.op) {
            case Opcode::FieldStore:
            case Opcode::FieldLoad: ci.field = field_slots_.at(i.base + "." + i.symbol); break;
            case Opcode::AddrOf:
            case Opcode::CallDirect:
            case Opcode::LogFn: ci.target = ids_.at(i.symbol); break;
            case Opcode::Goto:
            case Opcode::CondGoto: ci.target = labels.at(i.symbol); break;
            case Opcode::Effect: ci.name = &i.symbol; break;
            default: break;
            }
            c.code.push_back(std::move(ci));
        }
    }

    int fn_id(const std::string& name) const { return ids_.at(name); }

    int input_field(const std::string& field) const {
        return field_slots_.at(std::string(kInputGlobal) + "." + field);
    }

    const std::string& fn_name(int id) const { return fns_[id].def->name; }

    std::string mode_name(std::int64_t id) const {
        auto it = m_.mode_ids.find(id);
        if (it == m_.mode_ids.end())
            throw RuntimeFault("mode id " + std::to_string(id) + " names no mode");
        return it->second;
    }

    std::string format_value(std::int64_t v, TypeDesc::Kind k) const {
        if (k == TypeDesc::Kind::FuncRef)
            return v == kNullRef ? "null" : fn_name(static_cast<int>(v));
        return std::to_string(v);
    }

    void event(const std::string& e) {
        if (opt_.record_events)
            report_.events.push_back("t=" + std::to_string(tick_) + " " + e);
    }

    // --------------------------------------------------------------- run

    void iterate() {
        iteration_ticks_ = 0;
        invoke(entry_, {});
        if (opt_.monitor != MonitorMode::Off && !monitor_.shadow_stack.empty() && !violation_) {
            ++monitor_.stats.unbalanced_iterations;
            monitor_.shadow_stack.clear();
        }
        if (violation_)
            handle_violation();
    }

    void handle_violation() {
        violation_ = false;
        stack_.clear();
        monitor_.shadow_stack.clear();
        if (monitor_.fail_safe_triggered) {
            halted_ = true;
            return;
        }
        monitor_ = fail_safe(std::move(monitor_), *opt_.config);
        report_.fail_safe = true;
        event("failsafe");
        if (switcher_ >= 0) {
            std::int64_t id = *m_.mode_id(kFailSafeMode);
            iteration_ticks_ = 0;
            invoke(switcher_, {id});
            if (violation_) {
                violation_ = false;
                stack_.clear();
            }
        }
        halted_ = true;
    }

    // Runs `fn` to completion (or until a violation) on a fresh stack.
    void invoke(int fn, std::vector<std::int64_t> args) {
        push_frame(fn, args, -1, CallSite{}, false);
        while (!stack_.empty() && !violation_)
            step();
    }

    void push_frame(int fn, const std::vector<std::int64_t>& args, int ret_dst, CallSite return_site,
                    bool indirect) {
        if (stack_.size() >= opt_.max_call_depth)
            throw RuntimeFault("call depth limit exceeded calling '" + fn_name(fn) + "'");
        const CFn& c = fns_[fn];
        Frame f;
        f.fn = fn;
        f.slots.resize(c.slot_kinds.size());
        for (std::size_t k = 0; k < f.slots.size(); ++k)
            f.slots[k] = default_value(c.slot_kinds[k]);
        std::size_t n = std::min(args.size(), c.def->params.size());
        for (std::size_t k = 0; k < n; ++k)
            f.slots[k] = args[k];
        f.ret_dst = ret_dst;
        f.return_site = std::move(return_site);
        f.indirect = indirect;
        report_.observed[truth_mode_].insert(c.def->name);
        if (opt_.record_events)
            event("enter " + c.def->name);
        if (!stack_.empty()) {
            const Frame& caller = stack_.back();
            if (fns_[caller.fn].switcher && !caller.set_mode_to.empty() && !c.switcher)
                report_.entry_observations.push_back({caller.set_mode_to, c.def->name, tick_});
        }
        stack_.push_back(std::move(f));
    }

    std::vector<std::int64_t> gather(const Frame& f, const std::vector<int>& slots) const {
        std::vector<std::int64_t> v;
        v.reserve(slots.size());
        for (int s : slots)
            v.push_back(f.slots[s]);
        return v;
    }

    void tick_once() {
        ++tick_;
        if (++iteration_ticks_ > opt_.iteration_budget)
            throw RuntimeFault("instruction budget exceeded in one entry-loop iteration");
    }

    void step() {
        Frame& f = stack_.back();
        const CFn& c = fns_[f.fn];
        if (f.pc >= c.code.size())
            throw RuntimeFault("fell off the end of '" + c.def->name + "'");
        const std::size_t here = f.pc;
        const CInstr& i = c.code[here];
        if (i.op != Opcode::ModeEntry && i.op != Opcode::LogFn)
            tick_once();
        ++f.pc;

        switch (i.op) {
        case Opcode::Assign: f.slots[i.dst] = f.slots[i.src]; break;
        case Opcode::AddrOf: f.slots[i.dst] = i.target; break;
        case Opcode::FieldStore: globals_[i.field] = f.slots[i.src]; break;
        case Opcode::FieldLoad: f.slots[i.dst] = globals_[i.field]; break;
        case Opcode::ConstInt: f.slots[i.dst] = i.imm; break;
        case Opcode::CmpEq: f.slots[i.dst] = f.slots[i.src] == f.slots[i.src2] ? 1 : 0; break;
        case Opcode::Label: break;
        case Opcode::Goto: f.pc = static_cast<std::size_t>(i.target); break;
        case Opcode::CondGoto:
            if (f.slots[i.src] != 0)
                f.pc = static_cast<std::size_t>(i.target);
            break;
        case Opcode::Effect: {
            EffectEvent e{tick_, *i.name, {}};
            for (int a : i.args)
                e.args.push_back(format_value(f.slots[a], c.slot_kinds[a]));
            report_.effects.push_back(std::move(e));
            break;
        }
        case Opcode::SetMode: {
            std::string mode = mode_name(f.slots[i.src]);
            report_.mode_transitions.push_back({tick_, truth_mode_, mode});
            truth_mode_ = mode;
            f.set_mode_to = mode;
            event("setmode " + mode);
            break;
        }
        case Opcode::ModeEntry: {
            std::string mode = mode_name(f.slots[i.src]);
            profile_mode_ = mode;
            if (opt_.monitor != MonitorMode::Off) {
                if (opt_.config)
                    monitor_ = monitor_mode_switch(std::move(monitor_), mode, *opt_.config);
                else
                    monitor_.current_mode = mode;
            }
            event("mode_entry " + mode);
            break;
        }
        case Opcode::LogFn: report_.per_mode_executed[profile_mode_].insert(fn_name(i.target)); break;
        case Opcode::CallDirect: {
            auto args = gather(f, i.args);
            push_frame(i.target, args, i.dst, CallSite{c.def->name, here}, false);
            break;
        }
        case Opcode::CallIndirect:
        case Opcode::MonitoredCall: call_indirect(f, c, i, here); break;
        case Opcode::Return:
        case Opcode::MonitoredReturn: do_return(i); break;
        }
    }

    void call_indirect(Frame& f, const CFn& c, const CInstr& i, std::size_t here) {
        int target = -1;
        bool hijacked = false;
        if (hijack_.active()) {
            if (hijack_.remaining == 0) {
                target = hijack_.fn;
                hijacked = true;
                hijack_ = {};
            } else {
                --hijack_.remaining;
            }
        }
        if (!hijacked) {
            std::int64_t ref = f.slots[i.src];
            if (ref == kNullRef)
                throw RuntimeFault("indirect call through null reference in '" + c.def->name + "'");
            target = static_cast<int>(ref);
            if (!(fns_[target].sig == *i.declared))
                throw RuntimeFault("indirect call in '" + c.def->name + "' reaches '" + fn_name(target) +
                                   "' whose signature " + fns_[target].sig.to_string() + " differs from " +
                                   i.declared->to_string());
            report_.indirect_edges.insert({CallSite{c.def->name, here}, fn_name(target)});
        } else {
            event("hijack -> " + fn_name(target));
        }

        CallSite site{c.def->name, here};
        bool monitored = false;
        if (i.op == Opcode::MonitoredCall && opt_.monitor != MonitorMode::Off) {
            MonitorDecision d = monitor_call(monitor_, fn_name(target), site, tick_);
            if (!d.allowed) {
                event(d.violation->to_string());
                violation_ = true;
                return;
            }
            monitored = true;
            event("push " + site.to_string());
        }
        auto args = gather(f, i.args);
        push_frame(target, args, i.dst, site, true);
        stack_.back().monitored = monitored;
    }

    void do_return(const CInstr& i) {
        Frame& f = stack_.back();
        std::int64_t value = i.src >= 0 ? f.slots[i.src] : 0;
        CallSite actual = f.return_site;
        int gadget = -1;
        if (f.indirect && corrupt_.active()) {
            if (corrupt_.remaining == 0) {
                actual = CallSite{fn_name(corrupt_.fn), 0};
                gadget = corrupt_.fn;
                corrupt_ = {};
                event("corrupt-return -> " + actual.to_string());
            } else {
                --corrupt_.remaining;
            }
        }
        if (f.monitored) {
            if (i.op == Opcode::MonitoredReturn) {
                MonitorDecision d = monitor_return(monitor_, actual, tick_);
                if (!d.allowed) {
                    event(d.violation->to_string());
                    violation_ = true;
                    return;
                }
                event("pop " + actual.to_string());
            } else if (!monitor_.shadow_stack.empty()) {
                // Unchecked return from a monitored frame keeps the shadow depth in step.
                monitor_.shadow_stack.pop_back();
                ++monitor_.stats.pops;
            }
        }
        int ret_dst = f.ret_dst;
        stack_.pop_back();
        if (!stack_.empty() && ret_dst >= 0) {
            Frame& caller = stack_.back();
            bool callee_void = i.src < 0;
            caller.slots[ret_dst] = callee_void ? default_value(fns_[caller.fn].slot_kinds[ret_dst]) : value;
        }
        if (gadget >= 0 && !stack_.empty())
            push_frame(gadget, {}, -1, stack_.back().return_site, false);
    }

    const FirmwareModule& m_;
    const RunOptions& opt_;
    std::vector<CFn> fns_;
    std::map<std::string, int> ids_;
    std::map<std::string, int> field_slots_;
    std::vector<std::int64_t> globals_;
    std::vector<TypeDesc::Kind> global_kinds_;
    int entry_ = -1;
    int switcher_ = -1;

    std::vector<Frame> stack_;
    MonitorState monitor_;
    RunReport report_;
    std::string truth_mode_{kBootMode};
    std::string profile_mode_{kBootMode};
    std::uint64_t tick_ = 0;
    std::uint64_t iteration_ticks_ = 0;
    Armed hijack_;
    Armed corrupt_;
    bool violation_ = false;
    bool halted_ = false;
};

void join_into(std::ostream& os, const std::vector<std::string>& items, const char* sep) {
    for (std::size_t k = 0; k < items.size(); ++k)
        os << (k ? sep : "") << items[k];
}

} // namespace

bool RunReport::has_effect(const std::string& name) const {
    return std::any_of(effects.begin(), effects.end(), [&](const EffectEvent& e) { return e.name == name; });
}

std::size_t RunReport::violation_count(ViolationEvent::Kind kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const ViolationEvent& v) { return v.kind == kind; }));
}

std::string RunReport::to_text() const {
    std::ostringstream os;
    os << "mission " << mission << '\n';
    os << "  ticks      " << ticks << '\n';
    os << "  fail-safe  " << (fail_safe ? "yes" : "no") << '\n';
    os << "  transitions\n";
    for (const auto& t : mode_transitions)
        os << "    t=" << t.tick << "  " << (t.from.empty() ? "-" : t.from) << " -> " << t.to << '\n';
    os << "  effects (" << effects.size() << ")\n";
    for (const auto& e : effects) {
        os << "    t=" << e.tick << "  " << e.name << '(';
        join_into(os, e.args, ", ");
        os << ")\n";
    }
    os << "  violations (" << violations.size() << ")\n";
    for (const auto& v : violations)
        os << "    " << violation_kind_name(v.kind) << " in " << v.mode << " at " << v.site.to_string() << " -> "
           << v.target << " (t=" << v.tick << ")\n";
    os << "  shadow     pushes=" << shadow.pushes << " pops=" << shadow.pops << " mismatches=" << shadow.mismatches
       << " max_depth=" << shadow.max_depth << '\n';
    return os.str();
}

std::string RunReport::to_machine() const {
    std::ostringstream os;
    os << "mission=" << mission << '\n';
    os << "ticks=" << ticks << '\n';
    os << "failsafe=" << (fail_safe ? 1 : 0) << '\n';
    os << "violations=" << violations.size() << '\n';
    for (const auto& t : mode_transitions)
        os << "transition tick=" << t.tick << " from=" << (t.from.empty() ? "-" : t.from) << " to=" << t.to << '\n';
    for (const auto& e : effects) {
        os << "effect tick=" << e.tick << " name=" << e.name << " args=";
        join_into(os, e.args, ",");
        os << '\n';
    }
    for (const auto& v : violations)
        os << v.to_string() << '\n';
    os << "shadow pushes=" << shadow.pushes << " pops=" << shadow.pops << " mismatches=" << shadow.mismatches
       << " max_depth=" << shadow.max_depth << " unbalanced=" << shadow.unbalanced_iterations << '\n';
    for (const auto& [mode, fns] : per_mode_executed) {
        os << "profile mode=" << mode << " functions=";
        join_into(os, std::vector<std::string>(fns.begin(), fns.end()), ",");
        os << '\n';
    }
    return os.str();
}

RunReport run_mission(const FirmwareModule& module, const MissionScript& mission, const RunOptions& options) {
    return Interpreter(module, options).run(mission);
}

} // namespace modeguard
