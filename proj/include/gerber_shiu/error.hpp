#pragma once

#include <stdexcept>
#include <string>

namespace gerber_shiu {

enum class ErrorKind {
    config,       // malformed or out-of-range input
    domain,       // argument outside an operation's domain
    unsupported,  // parameter combination with no available formula
    numeric,      // non-finite intermediate, vanishing pivot
    divergence,   // integral or series failed to converge
    convergence,  // iterative solver stopped without meeting its criteria
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Process exit code used by the command-line front end.
    int exit_code() const noexcept {
        switch (kind_) {
        case ErrorKind::config:
        case ErrorKind::domain:
        case ErrorKind::unsupported:
            return 1;
        case ErrorKind::numeric:
        case ErrorKind::divergence:
            return 2;
        case ErrorKind::convergence:
            return 3;
        }
        return 2;
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace gerber_shiu
