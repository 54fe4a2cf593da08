#pragma once

#include <stdexcept>
#include <string>

namespace scalelab {

inline constexpr const char* version_string = "scalelab 0.1.0";

// Invalid argument / inconsistent configuration.
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A geometric operation has no legal outcome (e.g. no legal pixel move).
struct geometry_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct training_divergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace scalelab
