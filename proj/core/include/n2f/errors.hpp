#pragma once

#include <stdexcept>

namespace n2f {

// Invalid arguments are reported with std::invalid_argument; the types below
// cover the remaining failure classes.

/// Malformed, truncated or inconsistent file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A randomized construction could not make progress (e.g. ball packing stalled).
class CapacityExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training data without usable variation (constant targets, empty splits).
class DegenerateData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace n2f
