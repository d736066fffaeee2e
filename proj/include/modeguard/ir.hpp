#pragma once

// Textual firmware IR: types, instructions, functions and the module that
// every analysis and the interpreter consume.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "modeguard/errors.hpp"

namespace modeguard {

struct Signature;
struct RecordField;

/// Value type of a variable, parameter, record field or return slot.
///
/// FuncRef and Record payloads live behind shared immutable pointers so the
/// type stays a cheap value type despite being recursive.
class TypeDesc {
public:
    enum class Kind { Void, Int, Float, Bool, FuncRef, Record };

    TypeDesc() = default;

    static TypeDesc void_type() { return TypeDesc(Kind::Void); }
    static TypeDesc int_type() { return TypeDesc(Kind::Int); }
    static TypeDesc float_type() { return TypeDesc(Kind::Float); }
    static TypeDesc bool_type() { return TypeDesc(Kind::Bool); }
    static TypeDesc func_ref(Signature sig);
    static TypeDesc record(std::string name, std::vector<RecordField> fields);

    Kind kind() const noexcept { return kind_; }
    bool is_void() const noexcept { return kind_ == Kind::Void; }
    bool is_func_ref() const noexcept { return kind_ == Kind::FuncRef; }
    bool is_record() const noexcept { return kind_ == Kind::Record; }
    /// Int or Bool: usable as a branch condition or a ConstInt destination.
    bool is_scalar_int() const noexcept { return kind_ == Kind::Int || kind_ == Kind::Bool; }

    const Signature& signature() const; // FuncRef only
    const std::string& record_name() const; // Record only
    const std::vector<RecordField>& fields() const; // Record only
    const TypeDesc* field_type(std::string_view field) const;

    /// Number of FuncRef levels reached by following return types.
    int func_ref_return_depth() const;

    std::string to_string() const;

    friend bool operator==(const TypeDesc& a, const TypeDesc& b);

private:
    explicit TypeDesc(Kind k) : kind_(k) {}

    Kind kind_ = Kind::Void;
    std::shared_ptr<const Signature> sig_;
    std::string record_name_;
    std::shared_ptr<const std::vector<RecordField>> fields_;
};

struct RecordField {
    std::string name;
    TypeDesc type;
    friend bool operator==(const RecordField&, const RecordField&) = default;
};

struct Signature {
    std::vector<TypeDesc> params;
    TypeDesc result;

    std::string to_string() const; // "(int,bool)->void"
    friend bool operator==(const Signature&, const Signature&) = default;
};

/// Assignment compatibility: equal types, or any FuncRef to any FuncRef
/// (the IR's model of a C function-pointer cast).
bool assignable(const TypeDesc& to, const TypeDesc& from);

enum class Opcode {
    Assign,       // %dst = %src
    AddrOf,       // %dst = addrof F
    FieldStore,   // %base.field = %src
    FieldLoad,    // %dst = %base.field
    CallDirect,   // [%dst =] call F(args)
    CallIndirect, // [%dst =] icall %src(args) : sig
    Return,       // ret [%src]
    SetMode,      // setmode %src
    Effect,       // effect NAME(args)
    CondGoto,     // ifgoto %src L
    Goto,         // goto L
    Label,        // label L
    ConstInt,     // %dst = const N
    CmpEq,        // %dst = eq %src %src2
    // instrumentation-only kinds
    ModeEntry,       // mode_entry %src
    LogFn,           // log_fn F
    MonitoredCall,   // [%dst =] mcall %src(args) : sig
    MonitoredReturn, // mret [%src]
};

std::string_view opcode_name(Opcode op);
bool is_instrumentation(Opcode op);
bool is_indirect_call(Opcode op); // CallIndirect or MonitoredCall
bool is_return(Opcode op);        // Return or MonitoredReturn

/// One IR instruction. Operand slots are shared between opcodes; see the
/// comments on Opcode for which slots each kind uses. Variable names are
/// stored without the leading '%'.
struct Instruction {
    Opcode op = Opcode::Return;
    std::string dst;
    std::string src;
    std::string src2;
    std::string base;   // global record for FieldStore/FieldLoad
    std::string symbol; // function, label, field or effect name
    std::vector<std::string> args;
    std::optional<Signature> declared; // indirect calls
    std::int64_t imm = 0;
    int line = 0; // source position; ignored by equality

    static Instruction assign(std::string dst, std::string src);
    static Instruction addr_of(std::string dst, std::string fn);
    static Instruction field_store(std::string base, std::string field, std::string src);
    static Instruction field_load(std::string dst, std::string base, std::string field);
    static Instruction call(std::string fn, std::vector<std::string> args, std::string dst = {});
    static Instruction icall(std::string ref, std::vector<std::string> args, Signature sig,
                             std::string dst = {});
    static Instruction ret(std::string value = {});
    static Instruction set_mode(std::string var);
    static Instruction effect(std::string name, std::vector<std::string> args = {});
    static Instruction cond_goto(std::string cond, std::string label);
    static Instruction go_to(std::string label);
    static Instruction label(std::string name);
    static Instruction const_int(std::string dst, std::int64_t value);
    static Instruction cmp_eq(std::string dst, std::string lhs, std::string rhs);
    static Instruction mode_entry(std::string var);
    static Instruction log_fn(std::string fn);

    /// Every variable the instruction reads or writes.
    std::vector<std::string> used_vars() const;

    bool operator==(const Instruction& other) const;
};

/// Position of an instruction: (function, body index). Used for call-site
/// identities and for shadow-stack return descriptors.
struct CallSite {
    std::string function;
    std::size_t index = 0;

    std::string to_string() const { return function + "#" + std::to_string(index); }
    friend auto operator<=>(const CallSite&, const CallSite&) = default;
};

struct Param {
    std::string name;
    TypeDesc type;
    friend bool operator==(const Param&, const Param&) = default;
};

struct FunctionDef {
    std::string name;
    std::vector<Param> params;
    TypeDesc result = TypeDesc::void_type();
    std::map<std::string, TypeDesc> locals;
    std::vector<Instruction> body;
    bool is_mode_switcher = false;
    int line = 0;

    Signature signature() const;
    /// Type of a parameter or local, nullptr when undeclared.
    const TypeDesc* var_type(std::string_view var) const;
    bool has_instrumentation() const;

    bool operator==(const FunctionDef& other) const;
};

struct FirmwareModule {
    std::map<std::string, FunctionDef> functions;
    std::string entry = "main";
    std::set<std::string> mode_switchers;
    std::vector<std::string> mode_names;
    std::map<std::int64_t, std::string> mode_ids;
    std::map<std::string, TypeDesc> records;     // record name -> Record type
    std::map<std::string, std::string> globals;  // global name -> record name

    const FunctionDef* find(std::string_view fn) const;
    const FunctionDef& at(std::string_view fn) const; // throws UnknownFunction
    bool has_mode(std::string_view mode) const;
    std::optional<std::int64_t> mode_id(std::string_view mode) const;
    const TypeDesc* global_type(std::string_view global) const;
    bool is_instrumented() const;
    /// Switcher used to drive mode requests: the lexicographically first one.
    const FunctionDef* primary_switcher() const;

    bool operator==(const FirmwareModule& other) const;
};

/// Name of the reserved pre-first-switch mode.
inline constexpr std::string_view kBootMode = "INIT";
/// Name of the mode entered on any monitor violation.
inline constexpr std::string_view kFailSafeMode = "FAILSAFE";
/// Global record that carries mission inputs into the firmware.
inline constexpr std::string_view kInputGlobal = "in";
/// Field of the input record through which mode requests arrive.
inline constexpr std::string_view kModeRequestField = "mode_req";

/// Parses IR text. Throws SyntaxError, ResolutionError or TypeError, each
/// carrying positioned diagnostics.
FirmwareModule parse_firmware(std::string_view text);
FirmwareModule load_firmware(const std::string& path);

/// Empty iff every module invariant holds.
std::vector<Diagnostic> validate(const FirmwareModule& module);

/// Canonical text. Throws InvalidModule when validate() reports anything.
std::string serialize_firmware(const FirmwareModule& module);

std::string format_type(const TypeDesc& type);

} // namespace modeguard
