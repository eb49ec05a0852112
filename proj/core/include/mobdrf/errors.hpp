#pragma once
#include <stdexcept>
#include <string>

namespace mobdrf {

// Bad inputs: malformed files, schema violations, out-of-range arguments.
// The CLI maps these to exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariants. The CLI maps these to exit code 2.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace mobdrf
