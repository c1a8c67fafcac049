#pragma once

#include <stdexcept>
#include <string>

namespace ctxnav {

// Base class for every error thrown by this library.  Catching CtxError at the
// CLI boundary is enough to turn any internal failure into a diagnostic plus a
// nonzero exit code.
struct CtxError : std::runtime_error {
    explicit CtxError(const std::string& msg) : std::runtime_error(msg) {}
};

// --- numeric layer ---

struct ShapeError : CtxError {
    explicit ShapeError(const std::string& msg) : CtxError("shape mismatch: " + msg) {}
};

struct NotScalarError : CtxError {
    explicit NotScalarError(const std::string& msg) : CtxError("not a scalar: " + msg) {}
};

// --- language layer ---

struct UnknownTokenError : CtxError {
    explicit UnknownTokenError(const std::string& tok) : CtxError("unknown token: '" + tok + "'") {}
};

struct EmptyInstructionError : CtxError {
    EmptyInstructionError() : CtxError("instruction is empty") {}
};

struct InstructionTooLongError : CtxError {
    explicit InstructionTooLongError(const std::string& msg) : CtxError("instruction too long: " + msg) {}
};

// --- message-passing layer ---

struct RoundOutOfRangeError : CtxError {
    explicit RoundOutOfRangeError(const std::string& msg) : CtxError("round out of range: " + msg) {}
};

struct RoundMismatchError : CtxError {
    explicit RoundMismatchError(const std::string& msg) : CtxError("round mismatch: " + msg) {}
};

// --- planning / generation layer ---

struct AmbiguousReferentError : CtxError {
    explicit AmbiguousReferentError(const std::string& msg) : CtxError("ambiguous referent: " + msg) {}
};

struct UnreachableError : CtxError {
    explicit UnreachableError(const std::string& msg) : CtxError("target unreachable: " + msg) {}
};

struct GenerationExhaustedError : CtxError {
    explicit GenerationExhaustedError(const std::string& msg) : CtxError("generation exhausted: " + msg) {}
};

// --- serialization layer ---

struct FormatError : CtxError {
    explicit FormatError(const std::string& msg) : CtxError("format error: " + msg) {}
};

struct CheckpointError : CtxError {
    explicit CheckpointError(const std::string& msg) : CtxError("checkpoint error: " + msg) {}
};

struct ConfigError : CtxError {
    explicit ConfigError(const std::string& msg) : CtxError("config error: " + msg) {}
};

}  // namespace ctxnav
