// Line-oriented parser for the firmware IR.

#include <cctype>
#include <charconv>
#include <optional>

#include "modeguard/ir.hpp"

namespace modeguard {
namespace {

struct Token {
    enum class Kind { Ident, Var, Int, Punct, Arrow, End };
    Kind kind = Kind::End;
    std::string text;
    int column = 0;
};

struct SyntaxFailure {
    Diagnostic diag;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class LineLexer {
public:
    LineLexer(std::string_view line, int lineno) : lineno_(lineno) { lex(line); }

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }
    Token next() {
        Token t = peek();
        if (pos_ < tokens_.size() - 1)
            ++pos_;
        return t;
    }
    bool at_end() const { return peek().kind == Token::Kind::End; }

    bool accept_punct(char c) {
        if (peek().kind == Token::Kind::Punct && peek().text[0] == c) {
            next();
            return true;
        }
        return false;
    }
    bool accept_ident(std::string_view word) {
        if (peek().kind == Token::Kind::Ident && peek().text == word) {
            next();
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg, const Token* at = nullptr) const {
        const Token& t = at ? *at : peek();
        throw SyntaxFailure{Diagnostic{Diagnostic::Category::Syntax, lineno_, t.column, "syntax", msg}};
    }

    void expect_punct(char c) {
        if (!accept_punct(c))
            fail(std::string("expected '") + c + "'");
    }
    void expect_arrow() {
        if (peek().kind != Token::Kind::Arrow)
            fail("expected '->'");
        next();
    }
    std::string expect_ident(const char* what) {
        if (peek().kind != Token::Kind::Ident)
            fail(std::string("expected ") + what);
        return next().text;
    }
    std::string expect_var(const char* what) {
        if (peek().kind != Token::Kind::Var)
            fail(std::string("expected ") + what);
        return next().text;
    }
    std::int64_t expect_int() {
        if (peek().kind != Token::Kind::Int)
            fail("expected integer literal");
        Token t = next();
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            fail("integer literal out of range", &t);
        return v;
    }
    void expect_end() {
        if (!at_end())
            fail("unexpected trailing input '" + peek().text + "'");
    }

    int line() const { return lineno_; }

private:
    void lex(std::string_view s) {
        std::size_t i = 0;
        while (i < s.size()) {
            char c = s[i];
            int col = static_cast<int>(i) + 1;
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
            } else if (c == '#') {
                break;
            } else if (ident_start(c)) {
                std::size_t j = i;
                while (j < s.size() && ident_char(s[j]))
                    ++j;
                tokens_.push_back({Token::Kind::Ident, std::string(s.substr(i, j - i)), col});
                i = j;
            } else if (c == '%') {
                std::size_t j = i + 1;
                if (j >= s.size() || !ident_start(s[j]))
                    throw_at(col, "malformed variable name");
                while (j < s.size() && ident_char(s[j]))
                    ++j;
                tokens_.push_back({Token::Kind::Var, std::string(s.substr(i + 1, j - i - 1)), col});
                i = j;
            } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
                tokens_.push_back({Token::Kind::Arrow, "->", col});
                i += 2;
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
                std::size_t j = i + 1;
                while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
                    ++j;
                tokens_.push_back({Token::Kind::Int, std::string(s.substr(i, j - i)), col});
                i = j;
            } else if (std::string_view("=(){},:.").find(c) != std::string_view::npos) {
                tokens_.push_back({Token::Kind::Punct, std::string(1, c), col});
                ++i;
            } else {
                throw_at(col, std::string("unexpected character '") + c + "'");
            }
        }
        tokens_.push_back({Token::Kind::End, "<end of line>", static_cast<int>(s.size()) + 1});
    }

    [[noreturn]] void throw_at(int col, const std::string& msg) const {
        throw SyntaxFailure{Diagnostic{Diagnostic::Category::Syntax, lineno_, col, "syntax", msg}};
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int lineno_;
};

TypeDesc parse_type(LineLexer& lx);

Signature parse_signature_tail(LineLexer& lx) {
    // '(' [type {',' type}] ')' '->' type
    Signature sig;
    lx.expect_punct('(');
    if (!lx.accept_punct(')')) {
        do {
            sig.params.push_back(parse_type(lx));
        } while (lx.accept_punct(','));
        lx.expect_punct(')');
    }
    lx.expect_arrow();
    sig.result = parse_type(lx);
    return sig;
}

TypeDesc parse_type(LineLexer& lx) {
    std::string word = lx.expect_ident("type");
    if (word == "int")
        return TypeDesc::int_type();
    if (word == "float")
        return TypeDesc::float_type();
    if (word == "bool")
        return TypeDesc::bool_type();
    if (word == "void")
        return TypeDesc::void_type();
    if (word == "fnref")
        return TypeDesc::func_ref(parse_signature_tail(lx));
    // Record names are only meaningful in `global` declarations.
    return TypeDesc::record(word, {});
}

std::vector<std::string> parse_args(LineLexer& lx) {
    std::vector<std::string> args;
    lx.expect_punct('(');
    if (lx.accept_punct(')'))
        return args;
    do {
        args.push_back(lx.expect_var("argument variable"));
    } while (lx.accept_punct(','));
    lx.expect_punct(')');
    return args;
}

Instruction parse_call_rhs(LineLexer& lx, std::string dst) {
    Token kw = lx.next();
    if (kw.text == "call") {
        std::string fn = lx.expect_ident("callee name");
        auto args = parse_args(lx);
        return Instruction::call(std::move(fn), std::move(args), std::move(dst));
    }
    // icall / mcall / call_indirect
    std::string ref = lx.expect_var("function reference variable");
    auto args = parse_args(lx);
    Instruction i;
    if (kw.text == "call_indirect" && !lx.accept_punct(':')) {
        // Long spelling may omit the signature; it is taken from the reference type.
        i = Instruction::icall(std::move(ref), std::move(args), {}, std::move(dst));
        i.declared.reset();
        return i;
    }
    if (kw.text != "call_indirect")
        lx.expect_punct(':');
    i = Instruction::icall(std::move(ref), std::move(args), parse_signature_tail(lx), std::move(dst));
    if (kw.text == "mcall")
        i.op = Opcode::MonitoredCall;
    return i;
}

bool is_call_keyword(const Token& t) {
    return t.kind == Token::Kind::Ident && (t.text == "call" || t.text == "icall" || t.text == "mcall" ||
                                          t.text == "call_indirect");
}

Instruction parse_instruction(LineLexer& lx) {
    const Token first = lx.peek();
    Instruction inst;
    if (first.kind == Token::Kind::Ident) {
        const std::string& w = first.text;
        if (is_call_keyword(first)) {
            inst = parse_call_rhs(lx, {});
        } else if (w == "ret" || w == "mret") {
            lx.next();
            std::string v;
            if (lx.peek().kind == Token::Kind::Var)
                v = lx.next().text;
            inst = Instruction::ret(std::move(v));
            if (w == "mret")
                inst.op = Opcode::MonitoredReturn;
        } else if (w == "setmode") {
            lx.next();
            inst = Instruction::set_mode(lx.expect_var("mode variable"));
        } else if (w == "mode_entry") {
            lx.next();
            inst = Instruction::mode_entry(lx.expect_var("mode variable"));
        } else if (w == "log_fn") {
            lx.next();
            inst = Instruction::log_fn(lx.expect_ident("function name"));
        } else if (w == "effect") {
            lx.next();
            std::string name = lx.expect_ident("effect name");
            inst = Instruction::effect(std::move(name), parse_args(lx));
        } else if (w == "label") {
            lx.next();
            inst = Instruction::label(lx.expect_ident("label name"));
        } else if (w == "goto") {
            lx.next();
            inst = Instruction::go_to(lx.expect_ident("label name"));
        } else if (w == "ifgoto") {
            lx.next();
            std::string cond = lx.expect_var("condition variable");
            inst = Instruction::cond_goto(std::move(cond), lx.expect_ident("label name"));
        } else {
            lx.fail("unknown instruction '" + w + "'");
        }
    } else if (first.kind == Token::Kind::Var) {
        std::string lhs = lx.next().text;
        if (lx.accept_punct('.')) {
            std::string field = lx.expect_ident("field name");
            lx.expect_punct('=');
            inst = Instruction::field_store(std::move(lhs), std::move(field), lx.expect_var("source variable"));
        } else {
            lx.expect_punct('=');
            const Token rhs = lx.peek();
            if (rhs.kind == Token::Kind::Var) {
                std::string src = lx.next().text;
                if (lx.accept_punct('.'))
                    inst = Instruction::field_load(std::move(lhs), std::move(src), lx.expect_ident("field name"));
                else
                    inst = Instruction::assign(std::move(lhs), std::move(src));
            } else if (rhs.kind == Token::Kind::Ident && rhs.text == "const") {
                lx.next();
                inst = Instruction::const_int(std::move(lhs), lx.expect_int());
            } else if (rhs.kind == Token::Kind::Ident && rhs.text == "addrof") {
                lx.next();
                inst = Instruction::addr_of(std::move(lhs), lx.expect_ident("function name"));
            } else if (rhs.kind == Token::Kind::Ident && rhs.text == "eq") {
                lx.next();
                std::string a = lx.expect_var("comparison operand");
                inst = Instruction::cmp_eq(std::move(lhs), std::move(a), lx.expect_var("comparison operand"));
            } else if (is_call_keyword(rhs)) {
                inst = parse_call_rhs(lx, std::move(lhs));
            } else {
                lx.fail("malformed right-hand side");
            }
        }
    } else {
        lx.fail("expected an instruction");
    }
    lx.expect_end();
    inst.line = lx.line();
    return inst;
}

class ModuleParser {
public:
    FirmwareModule run(std::string_view text) {
        int lineno = 0;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos)
                end = text.size();
            ++lineno;
            std::string_view line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            handle_line(line, lineno);
            if (end == text.size())
                break;
            start = end + 1;
        }
        if (current_)
            throw SyntaxFailure{Diagnostic{Diagnostic::Category::Syntax, current_->line, 0, "syntax",
                                           "function '" + current_->name + "' is missing its closing '}'"}};
        finish();
        return std::move(module_);
    }

private:
    void handle_line(std::string_view line, int lineno) {
        LineLexer lx(line, lineno);
        if (lx.at_end())
            return;
        if (current_) {
            if (lx.accept_punct('}')) {
                lx.expect_end();
                close_function(lineno);
                return;
            }
            if (lx.accept_ident("var")) {
                Token at = lx.peek();
                std::string name = lx.expect_var("local variable");
                lx.expect_punct(':');
                TypeDesc t = parse_type(lx);
                lx.expect_end();
                if (current_->var_type(name))
                    resolution(lineno, at.column, "duplicate-var",
                               "variable '%" + name + "' declared twice in '" + current_->name + "'");
                else
                    current_->locals.emplace(name, std::move(t));
                return;
            }
            current_->body.push_back(parse_instruction(lx));
            return;
        }
        const Token head = lx.peek();
        std::string word = lx.expect_ident("directive");
        if (word == "modes") {
            do {
                module_.mode_names.push_back(lx.expect_ident("mode name"));
            } while (lx.accept_punct(','));
            lx.expect_end();
        } else if (word == "modeid") {
            std::int64_t id = lx.expect_int();
            std::string name = lx.expect_ident("mode name");
            lx.expect_end();
            if (!module_.mode_ids.emplace(id, name).second)
                type_error(lineno, head.column, "modeid-bijection", "mode id " + std::to_string(id) + " assigned twice");
            saw_modeid_ = true;
        } else if (word == "switcher") {
            std::string name = lx.expect_ident("function name");
            lx.expect_end();
            module_.mode_switchers.insert(name);
        } else if (word == "entry") {
            module_.entry = lx.expect_ident("function name");
            lx.expect_end();
        } else if (word == "record") {
            std::string name = lx.expect_ident("record name");
            lx.expect_punct('{');
            std::vector<RecordField> fields;
            if (!lx.accept_punct('}')) {
                do {
                    std::string f = lx.expect_ident("field name");
                    lx.expect_punct(':');
                    fields.push_back({f, parse_type(lx)});
                } while (lx.accept_punct(','));
                lx.expect_punct('}');
            }
            lx.expect_end();
            if (module_.records.count(name))
                resolution(lineno, head.column, "duplicate-record", "record '" + name + "' declared twice");
            module_.records.emplace(name, TypeDesc::record(name, std::move(fields)));
        } else if (word == "global") {
            std::string g = lx.expect_var("global name");
            lx.expect_punct(':');
            std::string rec = lx.expect_ident("record name");
            lx.expect_end();
            if (!module_.globals.emplace(g, rec).second)
                resolution(lineno, head.column, "duplicate-global", "global '%" + g + "' declared twice");
        } else if (word == "fn") {
            open_function(lx, lineno);
        } else {
            lx.fail("unknown directive '" + word + "'", &head);
        }
    }

    void open_function(LineLexer& lx, int lineno) {
        FunctionDef fn;
        fn.line = lineno;
        fn.name = lx.expect_ident("function name");
        lx.expect_punct('(');
        if (!lx.accept_punct(')')) {
            do {
                std::string p = lx.expect_var("parameter");
                lx.expect_punct(':');
                fn.params.push_back({p, parse_type(lx)});
            } while (lx.accept_punct(','));
            lx.expect_punct(')');
        }
        if (lx.peek().kind == Token::Kind::Arrow) {
            lx.next();
            fn.result = parse_type(lx);
        }
        lx.expect_punct('{');
        lx.expect_end();
        current_ = std::move(fn);
    }

    void close_function(int lineno) {
        FunctionDef fn = std::move(*current_);
        current_.reset();
        if (module_.functions.count(fn.name)) {
            resolution(lineno, 0, "unique-function", "function '" + fn.name + "' defined twice");
            return;
        }
        std::string name = fn.name;
        module_.functions.emplace(name, std::move(fn));
    }

    void finish() {
        if (!saw_modeid_) {
            std::int64_t id = 1;
            for (const auto& m : module_.mode_names)
                module_.mode_ids.emplace(id++, m);
        }
        for (const auto& s : module_.mode_switchers) {
            auto it = module_.functions.find(s);
            if (it != module_.functions.end())
                it->second.is_mode_switcher = true;
        }
    }

    void resolution(int line, int col, std::string inv, std::string msg) {
        early_.push_back({Diagnostic::Category::Resolution, line, col, std::move(inv), std::move(msg)});
    }
    void type_error(int line, int col, std::string inv, std::string msg) {
        early_.push_back({Diagnostic::Category::Type, line, col, std::move(inv), std::move(msg)});
    }

public:
    std::vector<Diagnostic> early_;

private:
    FirmwareModule module_;
    std::optional<FunctionDef> current_;
    bool saw_modeid_ = false;
};

} // namespace

FirmwareModule parse_firmware(std::string_view text) {
    ModuleParser parser;
    FirmwareModule module;
    try {
        module = parser.run(text);
    } catch (const SyntaxFailure& f) {
        throw SyntaxError(f.diag.to_string(), {f.diag});
    }
    for (auto& [name, fn] : module.functions)
        for (auto& i : fn.body)
            if (i.op == Opcode::CallIndirect && !i.declared)
                if (const TypeDesc* r = fn.var_type(i.src); r && r->is_func_ref())
                    i.declared = r->signature();

    std::vector<Diagnostic> diags = parser.early_;
    auto more = validate(module);
    diags.insert(diags.end(), more.begin(), more.end());

    std::vector<Diagnostic> resolution, typing;
    for (const auto& d : diags) {
        if (d.category == Diagnostic::Category::Resolution) {
            resolution.push_back(d);
        } else {
            typing.push_back(d);
        }
    }
    if (!resolution.empty())
        throw ResolutionError(resolution.front().to_string(), resolution);
    if (!typing.empty())
        throw TypeError(typing.front().to_string(), typing);
    return module;
}

} // namespace modeguard
