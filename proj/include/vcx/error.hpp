#pragma once

#include <stdexcept>
#include <string>

namespace vcx {

// Numeric values are mirrored by vcx_status in vcx.h.
enum class ErrorCode : int {
    kInvalidArgument = 1,
    kNotFound = 2,
    kDecode = 3,
    kDegenerate = 4,
    kSingular = 5,
    kDisconnected = 6,
    kIo = 7,
    kNetwork = 8,
    kAuth = 9,
    kParse = 10,
    kRange = 11,
    kState = 12,
    kInternal = 13,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace vcx
