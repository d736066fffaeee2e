#include <algorithm>
#include <cctype>

#include "modeguard/ir.hpp"

namespace modeguard {
namespace {

constexpr int kMaxFuncRefReturnDepth = 2;

class Validator {
public:
    explicit Validator(const FirmwareModule& m) : m_(m) {}

    std::vector<Diagnostic> run() {
        check_module();
        for (const auto& [name, fn] : m_.functions)
            check_function(fn);
        return std::move(out_);
    }

private:
    void resolution(int line, std::string inv, std::string msg) {
        out_.push_back({Diagnostic::Category::Resolution, line, 0, std::move(inv), std::move(msg)});
    }
    void type(int line, std::string inv, std::string msg) {
        out_.push_back({Diagnostic::Category::Type, line, 0, std::move(inv), std::move(msg)});
    }

    // A value type usable for params, locals and record fields.
    void check_value_type(const TypeDesc& t, int line, const std::string& what) {
        if (t.is_void()) {
            type(line, "no-void-value", what + " has type void");
            return;
        }
        check_nested(t, line, what);
    }

    void check_nested(const TypeDesc& t, int line, const std::string& what) {
        if (t.is_record()) {
            type(line, "record-only-global", what + " has record type '" + t.record_name() +
                                                  "'; records are only allowed for globals");
            return;
        }
        if (!t.is_func_ref())
            return;
        if (t.func_ref_return_depth() > kMaxFuncRefReturnDepth)
            type(line, "fnref-depth", what + " nests fnref returns deeper than " +
                                          std::to_string(kMaxFuncRefReturnDepth));
        const Signature& sig = t.signature();
        for (const auto& p : sig.params) {
            if (p.is_void())
                type(line, "no-void-param", what + " has a void parameter in its signature");
            else
                check_nested(p, line, what);
        }
        if (!sig.result.is_void())
            check_nested(sig.result, line, what);
    }

    void check_signature(const Signature& sig, int line, const std::string& what) {
        check_nested(TypeDesc::func_ref(sig), line, what);
    }

    void check_module() {
        const FunctionDef* entry = m_.find(m_.entry);
        if (!entry)
            resolution(0, "entry-defined", "entry function '" + m_.entry + "' is not defined");
        else if (entry->is_mode_switcher || m_.mode_switchers.count(m_.entry))
            type(entry->line, "entry-not-switcher", "entry must not be a mode-switcher");

        std::set<std::string> seen;
        for (const auto& mode : m_.mode_names) {
            bool ok = !mode.empty() && std::isupper(static_cast<unsigned char>(mode[0]));
            for (char c : mode)
                ok = ok && (std::isupper(static_cast<unsigned char>(c)) ||
                            std::isdigit(static_cast<unsigned char>(c)) || c == '_');
            if (!ok)
                type(0, "mode-name-upper", "mode name '" + mode + "' must be an upper-case identifier");
            if (mode == kBootMode)
                type(0, "mode-name-reserved", "mode name '" + mode + "' is reserved for the boot mode");
            if (!seen.insert(mode).second)
                type(0, "mode-name-unique", "mode '" + mode + "' declared twice");
        }
        std::map<std::string, int> id_count;
        for (const auto& [id, name] : m_.mode_ids) {
            if (!m_.has_mode(name))
                type(0, "modeid-bijection", "mode id " + std::to_string(id) + " names undeclared mode '" + name + "'");
            ++id_count[name];
        }
        for (const auto& mode : m_.mode_names) {
            auto n = id_count[mode];
            if (n != 1)
                type(0, "modeid-bijection", "mode '" + mode + "' has " + std::to_string(n) + " ids; exactly one required");
        }

        for (const auto& s : m_.mode_switchers) {
            const FunctionDef* fn = m_.find(s);
            if (!fn)
                resolution(0, "switcher-defined", "mode-switcher '" + s + "' is not defined");
            else if (!fn->is_mode_switcher)
                type(fn->line, "switcher-flag", "mode-switcher '" + s + "' is not flagged as a switcher");
        }
        for (const auto& [name, fn] : m_.functions)
            if (fn.is_mode_switcher && !m_.mode_switchers.count(name))
                type(fn.line, "switcher-flag", "function '" + name + "' is flagged as a switcher but not declared");

        for (const auto& [name, rec] : m_.records) {
            std::set<std::string> fields;
            for (const auto& f : rec.fields()) {
                if (!fields.insert(f.name).second)
                    type(0, "record-field-unique", "record '" + name + "' declares field '" + f.name + "' twice");
                check_value_type(f.type, 0, "field '" + name + "." + f.name + "'");
            }
        }
        for (const auto& [g, rec] : m_.globals) {
            if (!m_.records.count(rec))
                resolution(0, "global-record", "global '%" + g + "' has unknown record type '" + rec + "'");
        }
    }

    const TypeDesc* var(const FunctionDef& fn, const std::string& v, int line) {
        if (m_.globals.count(v) && !fn.var_type(v)) {
            type(line, "global-as-value", "global '%" + v + "' used as a value in '" + fn.name + "'");
            return nullptr;
        }
        const TypeDesc* t = fn.var_type(v);
        if (!t)
            resolution(line, "var-declared", "undeclared variable '%" + v + "' in '" + fn.name + "'");
        return t;
    }

    const TypeDesc* field(const FunctionDef& fn, const Instruction& i) {
        const TypeDesc* rec = m_.global_type(i.base);
        if (!m_.globals.count(i.base)) {
            resolution(i.line, "global-declared", "unknown global '%" + i.base + "' in '" + fn.name + "'");
            return nullptr;
        }
        if (!rec)
            return nullptr;
        const TypeDesc* f = rec->field_type(i.symbol);
        if (!f)
            resolution(i.line, "field-declared",
                       "record '" + rec->record_name() + "' has no field '" + i.symbol + "'");
        return f;
    }

    void check_args(const FunctionDef& fn, const Instruction& i, const std::vector<TypeDesc>& params,
                    const std::string& callee) {
        if (i.args.size() != params.size()) {
            type(i.line, "call-arity", "call to " + callee + " passes " + std::to_string(i.args.size()) +
                                           " arguments, expected " + std::to_string(params.size()));
            return;
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            const TypeDesc* a = var(fn, i.args[k], i.line);
            if (a && !assignable(params[k], *a))
                type(i.line, "call-arg-type", "argument " + std::to_string(k + 1) + " of call to " + callee +
                                                  " has type " + format_type(*a) + ", expected " +
                                                  format_type(params[k]));
        }
    }

    void check_result(const FunctionDef& fn, const Instruction& i, const TypeDesc& result,
                      const std::string& callee) {
        if (i.dst.empty())
            return;
        if (result.is_void()) {
            type(i.line, "call-result", "call to " + callee + " binds the result of a void function");
            return;
        }
        const TypeDesc* d = var(fn, i.dst, i.line);
        if (d && !assignable(*d, result))
            type(i.line, "call-result", "result of " + callee + " has type " + format_type(result) +
                                            ", destination is " + format_type(*d));
    }

    void check_instruction(const FunctionDef& fn, const Instruction& i, const std::set<std::string>& labels) {
        const int line = i.line;
        switch (i.op) {
        case Opcode::Assign: {
            const TypeDesc* d = var(fn, i.dst, line);
            const TypeDesc* s = var(fn, i.src, line);
            if (d && s && !assignable(*d, *s))
                type(line, "assign-type", "cannot assign " + format_type(*s) + " to " + format_type(*d));
            break;
        }
        case Opcode::AddrOf: {
            const TypeDesc* d = var(fn, i.dst, line);
            if (!m_.find(i.symbol))
                resolution(line, "addrof-function", "addrof names unknown function '" + i.symbol + "'");
            if (d && !d->is_func_ref())
                type(line, "addrof-type", "addrof destination '%" + i.dst + "' is not a fnref");
            break;
        }
        case Opcode::FieldStore: {
            const TypeDesc* f = field(fn, i);
            const TypeDesc* s = var(fn, i.src, line);
            if (f && s && !assignable(*f, *s))
                type(line, "field-type", "cannot store " + format_type(*s) + " into field of type " + format_type(*f));
            break;
        }
        case Opcode::FieldLoad: {
            const TypeDesc* f = field(fn, i);
            const TypeDesc* d = var(fn, i.dst, line);
            if (f && d && !assignable(*d, *f))
                type(line, "field-type", "cannot load field of type " + format_type(*f) + " into " + format_type(*d));
            break;
        }
        case Opcode::CallDirect: {
            const FunctionDef* callee = m_.find(i.symbol);
            if (!callee) {
                resolution(line, "call-function", "call to unknown function '" + i.symbol + "'");
                for (const auto& a : i.args)
                    var(fn, a, line);
                break;
            }
            Signature sig = callee->signature();
            check_args(fn, i, sig.params, "'" + i.symbol + "'");
            check_result(fn, i, sig.result, "'" + i.symbol + "'");
            break;
        }
        case Opcode::CallIndirect:
        case Opcode::MonitoredCall: {
            const TypeDesc* r = var(fn, i.src, line);
            if (!i.declared) {
                if (r && !r->is_func_ref())
                    type(line, "icall-ref-type", "indirect call through '%" + i.src + "' of non-fnref type " + format_type(*r));
                else
                    type(line, "icall-signature", "indirect call without a declared signature");
                break;
            }
            check_signature(*i.declared, line, "declared signature");
            if (r && !r->is_func_ref())
                type(line, "icall-ref-type", "indirect call through '%" + i.src + "' of non-fnref type " + format_type(*r));
            else if (r && !(r->signature() == *i.declared))
                type(line, "icall-ref-type", "declared signature " + i.declared->to_string() +
                                                 " differs from reference type " + format_type(*r));
            check_args(fn, i, i.declared->params, "through '%" + i.src + "'");
            check_result(fn, i, i.declared->result, "through '%" + i.src + "'");
            break;
        }
        case Opcode::Return:
        case Opcode::MonitoredReturn: {
            if (i.src.empty()) {
                if (!fn.result.is_void())
                    type(line, "return-value", "'" + fn.name + "' returns " + format_type(fn.result) + " but ret has no value");
            } else if (fn.result.is_void()) {
                type(line, "return-value", "'" + fn.name + "' returns void but ret carries a value");
                var(fn, i.src, line);
            } else if (const TypeDesc* v = var(fn, i.src, line); v && !assignable(fn.result, *v)) {
                type(line, "return-value", "ret value of type " + format_type(*v) + " in function returning " +
                                               format_type(fn.result));
            }
            break;
        }
        case Opcode::SetMode:
        case Opcode::ModeEntry: {
            const TypeDesc* v = var(fn, i.src, line);
            if (v && v->kind() != TypeDesc::Kind::Int)
                type(line, "mode-var-type", std::string(opcode_name(i.op)) + " operand must be int");
            break;
        }
        case Opcode::Effect:
            for (const auto& a : i.args)
                var(fn, a, line);
            break;
        case Opcode::CondGoto: {
            const TypeDesc* c = var(fn, i.src, line);
            if (c && !c->is_scalar_int())
                type(line, "cond-type", "ifgoto condition must be int or bool");
            [[fallthrough]];
        }
        case Opcode::Goto:
            if (!labels.count(i.symbol))
                resolution(line, "label-defined", "jump to undefined label '" + i.symbol + "' in '" + fn.name + "'");
            break;
        case Opcode::Label:
            break;
        case Opcode::ConstInt: {
            const TypeDesc* d = var(fn, i.dst, line);
            if (d && !d->is_scalar_int())
                type(line, "const-type", "const destination must be int or bool");
            break;
        }
        case Opcode::CmpEq: {
            const TypeDesc* d = var(fn, i.dst, line);
            const TypeDesc* a = var(fn, i.src, line);
            const TypeDesc* b = var(fn, i.src2, line);
            if (d && !d->is_scalar_int())
                type(line, "eq-type", "eq destination must be int or bool");
            if (a && b && (!(*a == *b) || !a->is_scalar_int()))
                type(line, "eq-type", "eq operands must both be int or both be bool");
            break;
        }
        case Opcode::LogFn:
            if (i.symbol != fn.name)
                type(line, "log-fn-self", "log_fn in '" + fn.name + "' names '" + i.symbol + "'");
            break;
        }

        if (is_instrumentation(i.op)) {
            bool switcher_only = i.op == Opcode::ModeEntry;
            if (switcher_only && !fn.is_mode_switcher)
                type(line, "marker-placement", "mode_entry outside a mode-switcher in '" + fn.name + "'");
            if (!switcher_only && fn.is_mode_switcher)
                type(line, "marker-placement", std::string(opcode_name(i.op)) + " inside mode-switcher '" + fn.name + "'");
        }
    }

    void check_function(const FunctionDef& fn) {
        std::set<std::string> names;
        for (const auto& p : fn.params) {
            check_value_type(p.type, fn.line, "parameter '%" + p.name + "' of '" + fn.name + "'");
            if (!names.insert(p.name).second)
                resolution(fn.line, "duplicate-var", "parameter '%" + p.name + "' declared twice in '" + fn.name + "'");
        }
        for (const auto& [name, t] : fn.locals) {
            check_value_type(t, fn.line, "local '%" + name + "' of '" + fn.name + "'");
            if (names.count(name))
                resolution(fn.line, "duplicate-var", "local '%" + name + "' shadows a parameter in '" + fn.name + "'");
        }
        for (const auto& n : names)
            if (m_.globals.count(n))
                resolution(fn.line, "shadow-global", "parameter '%" + n + "' shadows a global in '" + fn.name + "'");
        for (const auto& [name, t] : fn.locals)
            if (m_.globals.count(name))
                resolution(fn.line, "shadow-global", "local '%" + name + "' shadows a global in '" + fn.name + "'");
        if (!fn.result.is_void())
            check_nested(fn.result, fn.line, "return type of '" + fn.name + "'");

        if (fn.body.empty()) {
            type(fn.line, "non-empty-body", "function '" + fn.name + "' has an empty body");
            return;
        }

        std::map<std::string, std::size_t> labels;
        for (std::size_t k = 0; k < fn.body.size(); ++k) {
            const auto& i = fn.body[k];
            if (i.op == Opcode::Label && !labels.emplace(i.symbol, k).second)
                type(i.line, "label-unique", "label '" + i.symbol + "' defined twice in '" + fn.name + "'");
        }
        std::set<std::string> label_names;
        for (const auto& [l, k] : labels)
            label_names.insert(l);

        bool has_set_mode = false;
        for (const auto& i : fn.body) {
            check_instruction(fn, i, label_names);
            has_set_mode = has_set_mode || i.op == Opcode::SetMode;
        }
        if (fn.is_mode_switcher && !has_set_mode)
            type(fn.line, "switcher-setmode", "mode-switcher '" + fn.name + "' contains no setmode");
        if (!fn.is_mode_switcher && has_set_mode)
            type(fn.line, "switcher-setmode", "setmode in '" + fn.name + "', which is not a mode-switcher");

        check_paths(fn, labels);
    }

    // Every reachable instruction must either jump, return, or have a successor.
    void check_paths(const FunctionDef& fn, const std::map<std::string, std::size_t>& labels) {
        const std::size_t n = fn.body.size();
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> work{0};
        bool falls_off = false;
        while (!work.empty()) {
            std::size_t k = work.back();
            work.pop_back();
            if (k >= n) {
                falls_off = true;
                continue;
            }
            if (seen[k])
                continue;
            seen[k] = true;
            const auto& i = fn.body[k];
            if (is_return(i.op))
                continue;
            if (i.op == Opcode::Goto || i.op == Opcode::CondGoto) {
                auto it = labels.find(i.symbol);
                if (it != labels.end())
                    work.push_back(it->second);
                if (i.op == Opcode::Goto)
                    continue;
            }
            work.push_back(k + 1);
        }
        if (falls_off)
            type(fn.body.back().line ? fn.body.back().line : fn.line, "path-ends-in-ret",
                 "function '" + fn.name + "' can reach the end of its body without ret");
    }

    const FirmwareModule& m_;
    std::vector<Diagnostic> out_;
};

} // namespace

std::vector<Diagnostic> validate(const FirmwareModule& module) { return Validator(module).run(); }

} // namespace modeguard
