#pragma once

#include <stdexcept>
#include <string>

namespace seqrec {

// Stable error codes. Mirrored one-to-one by the C API status enum; the
// first group marks caller/configuration mistakes, the second runtime
// failures, so front-ends can map them to distinct exit codes.
enum class ErrorCode : int {
    InvalidArgument = 1,
    Config = 2,
    UnknownItem = 3,

    Io = 10,
    Parse = 11,
    EmptyInput = 12,
    DegenerateSplit = 13,
    EmptyVocab = 14,
    IndexOutOfRange = 15,
    NonFinite = 16,
    ZeroVector = 17,
    Internal = 18,
};

inline bool is_validation_error(ErrorCode code) {
    return static_cast<int>(code) < 10;
}

const char* error_code_name(ErrorCode code);

class SeqrecError : public std::runtime_error {
public:
    SeqrecError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw SeqrecError(code, message);
}

}  // namespace seqrec
