#pragma once

#include <stdexcept>
#include <string>

namespace kamtree {

// Bad argument or an object used outside its domain (mode outside the frequency
// window, infinite norm where a finite one is needed, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed external input (potential file, configuration).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An exact zero divisor omega . nu was met.
struct ResonanceError : std::runtime_error {
    ResonanceError(const std::string& what, std::string witness_mode)
        : std::runtime_error(what), witness(std::move(witness_mode)) {}
    std::string witness;
};

// A computation needs scales deeper than the available beta range.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An enumeration exceeded its configured cap.
struct ResourceError : std::runtime_error {
    ResourceError(const std::string& what, long long partial_count)
        : std::runtime_error(what), partial(partial_count) {}
    long long partial;
};

}  // namespace kamtree
