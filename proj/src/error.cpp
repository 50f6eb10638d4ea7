#include "seqrec/error.hpp"

namespace seqrec {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Config: return "config";
        case ErrorCode::UnknownItem: return "unknown_item";
        case ErrorCode::Io: return "io";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::EmptyInput: return "empty_input";
        case ErrorCode::DegenerateSplit: return "degenerate_split";
        case ErrorCode::EmptyVocab: return "empty_vocab";
        case ErrorCode::IndexOutOfRange: return "index_out_of_range";
        case ErrorCode::NonFinite: return "non_finite";
        case ErrorCode::ZeroVector: return "zero_vector";
        case ErrorCode::Internal: return "internal";
    }
    return "unknown";
}

}  // namespace seqrec
