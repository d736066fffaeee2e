#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "modeguard/ir.hpp"

namespace modeguard {

std::string Diagnostic::to_string() const {
    std::ostringstream os;
    switch (category) {
    case Category::Syntax: os << "syntax error"; break;
    case Category::Resolution: os << "resolution error"; break;
    case Category::Type: os << "type error"; break;
    }
    if (line > 0) {
        os << " at " << line;
        if (column > 0)
            os << ':' << column;
    }
    os << ": " << message;
    if (!invariant.empty())
        os << " [" << invariant << ']';
    return os.str();
}

TypeDesc TypeDesc::func_ref(Signature sig) {
    TypeDesc t(Kind::FuncRef);
    t.sig_ = std::make_shared<const Signature>(std::move(sig));
    return t;
}

TypeDesc TypeDesc::record(std::string name, std::vector<RecordField> fields) {
    TypeDesc t(Kind::Record);
    t.record_name_ = std::move(name);
    t.fields_ = std::make_shared<const std::vector<RecordField>>(std::move(fields));
    return t;
}

const Signature& TypeDesc::signature() const {
    if (kind_ != Kind::FuncRef)
        throw std::logic_error("TypeDesc::signature on non-fnref type");
    return *sig_;
}

const std::string& TypeDesc::record_name() const {
    if (kind_ != Kind::Record)
        throw std::logic_error("TypeDesc::record_name on non-record type");
    return record_name_;
}

const std::vector<RecordField>& TypeDesc::fields() const {
    if (kind_ != Kind::Record)
        throw std::logic_error("TypeDesc::fields on non-record type");
    return *fields_;
}

const TypeDesc* TypeDesc::field_type(std::string_view field) const {
    if (kind_ != Kind::Record)
        return nullptr;
    for (const auto& f : *fields_)
        if (f.name == field)
            return &f.type;
    return nullptr;
}

int TypeDesc::func_ref_return_depth() const {
    int depth = 0;
    const TypeDesc* t = this;
    while (t->is_func_ref()) {
        t = &t->signature().result;
        if (t->is_func_ref())
            ++depth;
    }
    return depth;
}

bool operator==(const TypeDesc& a, const TypeDesc& b) {
    if (a.kind_ != b.kind_)
        return false;
    switch (a.kind_) {
    case TypeDesc::Kind::FuncRef:
        return *a.sig_ == *b.sig_;
    case TypeDesc::Kind::Record:
        return a.record_name_ == b.record_name_ && *a.fields_ == *b.fields_;
    default:
        return true;
    }
}

std::string TypeDesc::to_string() const { return format_type(*this); }

std::string format_type(const TypeDesc& type) {
    switch (type.kind()) {
    case TypeDesc::Kind::Void: return "void";
    case TypeDesc::Kind::Int: return "int";
    case TypeDesc::Kind::Float: return "float";
    case TypeDesc::Kind::Bool: return "bool";
    case TypeDesc::Kind::FuncRef: return "fnref" + type.signature().to_string();
    case TypeDesc::Kind::Record: return type.record_name();
    }
    return "?";
}

std::string Signature::to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i)
            s += ',';
        s += format_type(params[i]);
    }
    s += ")->";
    s += format_type(result);
    return s;
}

bool assignable(const TypeDesc& to, const TypeDesc& from) {
    if (to.is_func_ref() && from.is_func_ref())
        return true;
    return to == from;
}

std::string_view opcode_name(Opcode op) {
    switch (op) {
    case Opcode::Assign: return "assign";
    case Opcode::AddrOf: return "addrof";
    case Opcode::FieldStore: return "fieldstore";
    case Opcode::FieldLoad: return "fieldload";
    case Opcode::CallDirect: return "call";
    case Opcode::CallIndirect: return "icall";
    case Opcode::Return: return "ret";
    case Opcode::SetMode: return "setmode";
    case Opcode::Effect: return "effect";
    case Opcode::CondGoto: return "ifgoto";
    case Opcode::Goto: return "goto";
    case Opcode::Label: return "label";
    case Opcode::ConstInt: return "const";
    case Opcode::CmpEq: return "eq";
    case Opcode::ModeEntry: return "mode_entry";
    case Opcode::LogFn: return "log_fn";
    case Opcode::MonitoredCall: return "mcall";
    case Opcode::MonitoredReturn: return "mret";
    }
    return "?";
}

bool is_instrumentation(Opcode op) {
    return op == Opcode::ModeEntry || op == Opcode::LogFn || op == Opcode::MonitoredCall ||
           op == Opcode::MonitoredReturn;
}

bool is_indirect_call(Opcode op) { return op == Opcode::CallIndirect || op == Opcode::MonitoredCall; }

bool is_return(Opcode op) { return op == Opcode::Return || op == Opcode::MonitoredReturn; }

Instruction Instruction::assign(std::string dst, std::string src) {
    Instruction i;
    i.op = Opcode::Assign;
    i.dst = std::move(dst);
    i.src = std::move(src);
    return i;
}

Instruction Instruction::addr_of(std::string dst, std::string fn) {
    Instruction i;
    i.op = Opcode::AddrOf;
    i.dst = std::move(dst);
    i.symbol = std::move(fn);
    return i;
}

Instruction Instruction::field_store(std::string base, std::string field, std::string src) {
    Instruction i;
    i.op = Opcode::FieldStore;
    i.base = std::move(base);
    i.symbol = std::move(field);
    i.src = std::move(src);
    return i;
}

Instruction Instruction::field_load(std::string dst, std::string base, std::string field) {
    Instruction i;
    i.op = Opcode::FieldLoad;
    i.dst = std::move(dst);
    i.base = std::move(base);
    i.symbol = std::move(field);
    return i;
}

Instruction Instruction::call(std::string fn, std::vector<std::string> args, std::string dst) {
    Instruction i;
    i.op = Opcode::CallDirect;
    i.symbol = std::move(fn);
    i.args = std::move(args);
    i.dst = std::move(dst);
    return i;
}

Instruction Instruction::icall(std::string ref, std::vector<std::string> args, Signature sig,
                               std::string dst) {
    Instruction i;
    i.op = Opcode::CallIndirect;
    i.src = std::move(ref);
    i.args = std::move(args);
    i.declared = std::move(sig);
    i.dst = std::move(dst);
    return i;
}

Instruction Instruction::ret(std::string value) {
    Instruction i;
    i.op = Opcode::Return;
    i.src = std::move(value);
    return i;
}

Instruction Instruction::set_mode(std::string var) {
    Instruction i;
    i.op = Opcode::SetMode;
    i.src = std::move(var);
    return i;
}

Instruction Instruction::effect(std::string name, std::vector<std::string> args) {
    Instruction i;
    i.op = Opcode::Effect;
    i.symbol = std::move(name);
    i.args = std::move(args);
    return i;
}

Instruction Instruction::cond_goto(std::string cond, std::string label) {
    Instruction i;
    i.op = Opcode::CondGoto;
    i.src = std::move(cond);
    i.symbol = std::move(label);
    return i;
}

Instruction Instruction::go_to(std::string label) {
    Instruction i;
    i.op = Opcode::Goto;
    i.symbol = std::move(label);
    return i;
}

Instruction Instruction::label(std::string name) {
    Instruction i;
    i.op = Opcode::Label;
    i.symbol = std::move(name);
    return i;
}

Instruction Instruction::const_int(std::string dst, std::int64_t value) {
    Instruction i;
    i.op = Opcode::ConstInt;
    i.dst = std::move(dst);
    i.imm = value;
    return i;
}

Instruction Instruction::cmp_eq(std::string dst, std::string lhs, std::string rhs) {
    Instruction i;
    i.op = Opcode::CmpEq;
    i.dst = std::move(dst);
    i.src = std::move(lhs);
    i.src2 = std::move(rhs);
    return i;
}

Instruction Instruction::mode_entry(std::string var) {
    Instruction i;
    i.op = Opcode::ModeEntry;
    i.src = std::move(var);
    return i;
}

Instruction Instruction::log_fn(std::string fn) {
    Instruction i;
    i.op = Opcode::LogFn;
    i.symbol = std::move(fn);
    return i;
}

std::vector<std::string> Instruction::used_vars() const {
    std::vector<std::string> vars;
    for (const auto* v : {&dst, &src, &src2})
        if (!v->empty())
            vars.push_back(*v);
    vars.insert(vars.end(), args.begin(), args.end());
    return vars;
}

bool Instruction::operator==(const Instruction& o) const {
    return std::tie(op, dst, src, src2, base, symbol, args, declared, imm) ==
           std::tie(o.op, o.dst, o.src, o.src2, o.base, o.symbol, o.args, o.declared, o.imm);
}

Signature FunctionDef::signature() const {
    Signature sig;
    sig.result = result;
    for (const auto& p : params)
        sig.params.push_back(p.type);
    return sig;
}

const TypeDesc* FunctionDef::var_type(std::string_view var) const {
    for (const auto& p : params)
        if (p.name == var)
            return &p.type;
    auto it = locals.find(std::string(var));
    return it == locals.end() ? nullptr : &it->second;
}

bool FunctionDef::has_instrumentation() const {
    return std::any_of(body.begin(), body.end(),
                       [](const Instruction& i) { return is_instrumentation(i.op); });
}

bool FunctionDef::operator==(const FunctionDef& o) const {
    return std::tie(name, params, result, locals, body, is_mode_switcher) ==
           std::tie(o.name, o.params, o.result, o.locals, o.body, o.is_mode_switcher);
}

const FunctionDef* FirmwareModule::find(std::string_view fn) const {
    auto it = functions.find(std::string(fn));
    return it == functions.end() ? nullptr : &it->second;
}

const FunctionDef& FirmwareModule::at(std::string_view fn) const {
    if (const auto* f = find(fn))
        return *f;
    throw UnknownFunction("unknown function '" + std::string(fn) + "'");
}

bool FirmwareModule::has_mode(std::string_view mode) const {
    return std::find(mode_names.begin(), mode_names.end(), mode) != mode_names.end();
}

std::optional<std::int64_t> FirmwareModule::mode_id(std::string_view mode) const {
    for (const auto& [id, name] : mode_ids)
        if (name == mode)
            return id;
    return std::nullopt;
}

const TypeDesc* FirmwareModule::global_type(std::string_view global) const {
    auto g = globals.find(std::string(global));
    if (g == globals.end())
        return nullptr;
    auto r = records.find(g->second);
    return r == records.end() ? nullptr : &r->second;
}

bool FirmwareModule::is_instrumented() const {
    return std::any_of(functions.begin(), functions.end(),
                       [](const auto& kv) { return kv.second.has_instrumentation(); });
}

const FunctionDef* FirmwareModule::primary_switcher() const {
    if (mode_switchers.empty())
        return nullptr;
    return find(*mode_switchers.begin());
}

bool FirmwareModule::operator==(const FirmwareModule& o) const {
    return std::tie(functions, entry, mode_switchers, mode_names, mode_ids, records, globals) ==
           std::tie(o.functions, o.entry, o.mode_switchers, o.mode_names, o.mode_ids, o.records,
                    o.globals);
}

FirmwareModule load_firmware(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open firmware file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_firmware(ss.str());
}

} // namespace modeguard
