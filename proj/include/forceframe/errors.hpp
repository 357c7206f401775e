#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forceframe {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FORCEFRAME_DEFINE_ERROR(Name)               \
    class Name : public Error {                     \
    public:                                         \
        explicit Name(const std::string& what)      \
            : Error(#Name ": " + what) {}           \
    };

FORCEFRAME_DEFINE_ERROR(ZeroVector)
FORCEFRAME_DEFINE_ERROR(PreconditionViolation)
FORCEFRAME_DEFINE_ERROR(QuadratureTooCoarse)
FORCEFRAME_DEFINE_ERROR(NotSymmetric)
FORCEFRAME_DEFINE_ERROR(NotPSD)
FORCEFRAME_DEFINE_ERROR(UnconstrainedDirection)
FORCEFRAME_DEFINE_ERROR(InvalidScript)
FORCEFRAME_DEFINE_ERROR(DegenerateFrame)
FORCEFRAME_DEFINE_ERROR(EmptyHistory)
FORCEFRAME_DEFINE_ERROR(ChunkExhausted)
FORCEFRAME_DEFINE_ERROR(TooShort)
FORCEFRAME_DEFINE_ERROR(Divergence)
FORCEFRAME_DEFINE_ERROR(ConfigError)

#undef FORCEFRAME_DEFINE_ERROR

/// Errors tied to a line of a JSONL log (1-based).
class LineError : public Error {
public:
    LineError(const std::string& kind, std::size_t line, const std::string& what)
        : Error(kind + " (line " + std::to_string(line) + "): " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ParseError : public LineError {
public:
    ParseError(std::size_t line, const std::string& what) : LineError("ParseError", line, what) {}
};

class NonMonotonicTime : public LineError {
public:
    NonMonotonicTime(std::size_t line, const std::string& what)
        : LineError("NonMonotonicTime", line, what) {}
};

class NonFinite : public LineError {
public:
    NonFinite(std::size_t line, const std::string& what) : LineError("NonFinite", line, what) {}
};

}  // namespace forceframe
