#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace adjscope {

using Vector = std::vector<double>;

/// Raised for every contract violation or malformed input in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Collects non-fatal diagnostics (duplicate tokens, unused predicates, ...).
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
    if (sink) sink->push_back(std::move(message));
}

} // namespace adjscope
