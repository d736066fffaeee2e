#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace modeguard {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One problem found while parsing or validating firmware IR.
struct Diagnostic {
    enum class Category { Syntax, Resolution, Type };

    Category category = Category::Type;
    int line = 0;   // 1-based, 0 when the offending item was not parsed from text
    int column = 0; // 1-based, 0 when unknown
    std::string invariant; // short code naming the violated rule, e.g. "entry-not-switcher"
    std::string message;

    std::string to_string() const;
};

/// Errors that carry a diagnostic list (parse failures, invalid modules).
class DiagnosticError : public Error {
public:
    DiagnosticError(const std::string& what, std::vector<Diagnostic> diags)
        : Error(what), diagnostics_(std::move(diags)) {}

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

class SyntaxError : public DiagnosticError {
public:
    using DiagnosticError::DiagnosticError;
};
class ResolutionError : public DiagnosticError {
public:
    using DiagnosticError::DiagnosticError;
};
class TypeError : public DiagnosticError {
public:
    using DiagnosticError::DiagnosticError;
};
class InvalidModule : public DiagnosticError {
public:
    using DiagnosticError::DiagnosticError;
};

#define MODEGUARD_SIMPLE_ERROR(Name)          \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

MODEGUARD_SIMPLE_ERROR(DomainError);
MODEGUARD_SIMPLE_ERROR(NoSwitcher);
MODEGUARD_SIMPLE_ERROR(AlreadyInstrumented);
MODEGUARD_SIMPLE_ERROR(MissingMode);
MODEGUARD_SIMPLE_ERROR(NoEntryFound);
MODEGUARD_SIMPLE_ERROR(UnknownRoot);
MODEGUARD_SIMPLE_ERROR(FileFormatError);
MODEGUARD_SIMPLE_ERROR(UnknownFunction);
MODEGUARD_SIMPLE_ERROR(UnknownMode);
MODEGUARD_SIMPLE_ERROR(RuntimeFault);
MODEGUARD_SIMPLE_ERROR(ConfigMissing);
MODEGUARD_SIMPLE_ERROR(FatalConfig);
MODEGUARD_SIMPLE_ERROR(ConfigInvariantError);
MODEGUARD_SIMPLE_ERROR(UsageError);

#undef MODEGUARD_SIMPLE_ERROR

} // namespace modeguard
