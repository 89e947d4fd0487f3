#pragma once

#include <stdexcept>
#include <string>

namespace dr {

// Error categories map 1:1 onto CLI exit codes and C API status values.
enum class ErrorKind {
    Config = 1,    // bad configuration / schema violation
    Io = 2,        // file or stream failure
    Invariant = 3, // a documented invariant or acceptance check failed
    Numeric = 4,   // NaN/Inf or other numerical abort
    Invalid = 5,   // precondition violation (shapes, domains)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }
inline Error invariant_error(const std::string& msg) { return Error(ErrorKind::Invariant, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::Numeric, msg); }
inline Error invalid_error(const std::string& msg) { return Error(ErrorKind::Invalid, msg); }

} // namespace dr
