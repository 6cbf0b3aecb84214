#pragma once

#include <stdexcept>
#include <string>

namespace dronerid {

enum class ErrorCode {
    configuration,
    input_too_short,
    estimation_failed,
    identification_failed,
    design_failed,
    parse_failed,
    sync_failed,
    demod_failed,
    refinement_degenerate,
    io_failed,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace dronerid
