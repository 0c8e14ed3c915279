#pragma once

#include <stdexcept>
#include <string>

namespace frameproj {

/// Shape or size violation (mismatched dimensions, empty tensors, bad ranks).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

/// Numeric domain violation or non-finite result (log of non-positive, overflow to inf, NaN).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

/// API contract violation (wrong phase, non-scalar loss, batch too small, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

/// Invalid object state (e.g. backward on a consumed tape).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error("state error: " + msg) {}
};

/// Invalid configuration or parameter value.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

/// File or stream failure (short read, bad magic, unwritable path).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("i/o error: " + msg) {}
};

/// Cached artifact does not match the inputs it claims to be derived from.
struct StaleCacheError : std::runtime_error {
    explicit StaleCacheError(const std::string& msg) : std::runtime_error("stale cache: " + msg) {}
};

/// Malformed textual input; carries a 1-based line number when known.
struct ParseError : std::runtime_error {
    long line = -1;
    ParseError(const std::string& msg, long line_no)
        : std::runtime_error("parse error (line " + std::to_string(line_no) + "): " + msg), line(line_no) {}
    explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

/// Vector too close to zero for an angular or cosine computation.
struct DegenerateVectorError : std::runtime_error {
    explicit DegenerateVectorError(const std::string& msg)
        : std::runtime_error("degenerate vector: " + msg) {}
};

/// Requested geometric construction is infeasible in the given dimension.
struct ConstructionError : std::runtime_error {
    explicit ConstructionError(const std::string& msg) : std::runtime_error("construction error: " + msg) {}
};

/// A metric was requested on inputs where it is undefined.
struct MetricError : std::runtime_error {
    explicit MetricError(const std::string& msg) : std::runtime_error("metric error: " + msg) {}
};

}  // namespace frameproj
