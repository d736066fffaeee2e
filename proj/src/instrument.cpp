#include "modeguard/instrument.hpp"
#include "modeguard/pointsto.hpp"

namespace modeguard {
namespace {

void check_input(const FirmwareModule& module) {
    require_valid(module);
    if (module.mode_switchers.empty())
        throw NoSwitcher("module declares no mode-switcher");
    if (module.is_instrumented())
        throw AlreadyInstrumented("module already carries instrumentation markers");
}

void mark_mode_entries(FunctionDef& fn) {
    std::vector<Instruction> body;
    body.reserve(fn.body.size() + 2);
    for (auto& i : fn.body) {
        bool set_mode = i.op == Opcode::SetMode;
        std::string var = i.src;
        int line = i.line;
        body.push_back(std::move(i));
        if (set_mode) {
            body.push_back(Instruction::mode_entry(var));
            body.back().line = line;
        }
    }
    fn.body = std::move(body);
}

} // namespace

FirmwareModule instrument_profile(const FirmwareModule& module) {
    check_input(module);
    FirmwareModule out = module;
    for (auto& [name, fn] : out.functions) {
        if (fn.is_mode_switcher) {
            mark_mode_entries(fn);
        } else {
            Instruction log = Instruction::log_fn(name);
            log.line = fn.body.front().line;
            fn.body.insert(fn.body.begin(), std::move(log));
        }
    }
    require_valid(out);
    return out;
}

FirmwareModule instrument_guard(const FirmwareModule& module) {
    check_input(module);
    FirmwareModule out = module;
    for (auto& [name, fn] : out.functions) {
        if (fn.is_mode_switcher) {
            mark_mode_entries(fn);
            continue;
        }
        for (auto& i : fn.body) {
            if (i.op == Opcode::CallIndirect)
                i.op = Opcode::MonitoredCall;
            else if (i.op == Opcode::Return)
                i.op = Opcode::MonitoredReturn;
        }
        for (const auto& i : fn.body)
            if (i.op == Opcode::CallIndirect || i.op == Opcode::Return)
                throw std::logic_error("guard pass left a raw indirect transfer in '" + name + "'");
    }
    require_valid(out);
    return out;
}

} // namespace modeguard
