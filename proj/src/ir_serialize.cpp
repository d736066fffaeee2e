#include <sstream>

#include "modeguard/ir.hpp"

namespace modeguard {
namespace {

std::string join_vars(const std::vector<std::string>& vars) {
    std::string s;
    for (std::size_t k = 0; k < vars.size(); ++k) {
        if (k)
            s += ", ";
        s += '%';
        s += vars[k];
    }
    return s;
}

std::string format_instruction(const Instruction& i) {
    std::ostringstream os;
    auto dst_prefix = [&] {
        if (!i.dst.empty())
            os << '%' << i.dst << " = ";
    };
    switch (i.op) {
    case Opcode::Assign: os << '%' << i.dst << " = %" << i.src; break;
    case Opcode::AddrOf: os << '%' << i.dst << " = addrof " << i.symbol; break;
    case Opcode::FieldStore: os << '%' << i.base << '.' << i.symbol << " = %" << i.src; break;
    case Opcode::FieldLoad: os << '%' << i.dst << " = %" << i.base << '.' << i.symbol; break;
    case Opcode::CallDirect:
        dst_prefix();
        os << "call " << i.symbol << '(' << join_vars(i.args) << ')';
        break;
    case Opcode::CallIndirect:
    case Opcode::MonitoredCall:
        dst_prefix();
        os << (i.op == Opcode::CallIndirect ? "icall %" : "mcall %") << i.src << '(' << join_vars(i.args)
           << ") : " << i.declared->to_string();
        break;
    case Opcode::Return:
    case Opcode::MonitoredReturn:
        os << (i.op == Opcode::Return ? "ret" : "mret");
        if (!i.src.empty())
            os << " %" << i.src;
        break;
    case Opcode::SetMode: os << "setmode %" << i.src; break;
    case Opcode::Effect: os << "effect " << i.symbol << '(' << join_vars(i.args) << ')'; break;
    case Opcode::CondGoto: os << "ifgoto %" << i.src << ' ' << i.symbol; break;
    case Opcode::Goto: os << "goto " << i.symbol; break;
    case Opcode::Label: os << "label " << i.symbol; break;
    case Opcode::ConstInt: os << '%' << i.dst << " = const " << i.imm; break;
    case Opcode::CmpEq: os << '%' << i.dst << " = eq %" << i.src << " %" << i.src2; break;
    case Opcode::ModeEntry: os << "mode_entry %" << i.src; break;
    case Opcode::LogFn: os << "log_fn " << i.symbol; break;
    }
    return os.str();
}

} // namespace

std::string serialize_firmware(const FirmwareModule& m) {
    auto diags = validate(m);
    if (!diags.empty()) {
        std::string what = "cannot serialize invalid module: " + diags.front().to_string();
        throw InvalidModule(what, std::move(diags));
    }

    std::ostringstream os;
    if (!m.mode_names.empty()) {
        os << "modes ";
        for (std::size_t k = 0; k < m.mode_names.size(); ++k)
            os << (k ? "," : "") << m.mode_names[k];
        os << '\n';
        for (const auto& [id, name] : m.mode_ids)
            os << "modeid " << id << ' ' << name << '\n';
    }
    for (const auto& s : m.mode_switchers)
        os << "switcher " << s << '\n';
    os << "entry " << m.entry << '\n';

    if (!m.records.empty() || !m.globals.empty())
        os << '\n';
    for (const auto& [name, rec] : m.records) {
        os << "record " << name << " {";
        const auto& fields = rec.fields();
        for (std::size_t k = 0; k < fields.size(); ++k)
            os << (k ? ", " : " ") << fields[k].name << ": " << format_type(fields[k].type);
        os << (fields.empty() ? "}" : " }") << '\n';
    }
    for (const auto& [g, rec] : m.globals)
        os << "global %" << g << " : " << rec << '\n';

    for (const auto& [name, fn] : m.functions) {
        os << "\nfn " << name << '(';
        for (std::size_t k = 0; k < fn.params.size(); ++k)
            os << (k ? ", " : "") << '%' << fn.params[k].name << ": " << format_type(fn.params[k].type);
        os << ") -> " << format_type(fn.result) << " {\n";
        for (const auto& [v, t] : fn.locals)
            os << "  var %" << v << " : " << format_type(t) << '\n';
        for (const auto& i : fn.body)
            os << (i.op == Opcode::Label ? "" : "  ") << format_instruction(i) << '\n';
        os << "}\n";
    }
    return os.str();
}

} // namespace modeguard
