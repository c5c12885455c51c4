#include "vcx/error.hpp"

namespace vcx {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "invalid-argument";
        case ErrorCode::kNotFound: return "not-found";
        case ErrorCode::kDecode: return "undecodable-format";
        case ErrorCode::kDegenerate: return "degenerate-input";
        case ErrorCode::kSingular: return "singular-design";
        case ErrorCode::kDisconnected: return "disconnected-graph";
        case ErrorCode::kIo: return "io-error";
        case ErrorCode::kNetwork: return "network-error";
        case ErrorCode::kAuth: return "authentication-failure";
        case ErrorCode::kParse: return "parse-error";
        case ErrorCode::kRange: return "out-of-range";
        case ErrorCode::kState: return "invalid-state";
        case ErrorCode::kInternal: return "internal-error";
    }
    return "unknown";
}

}  // namespace vcx
