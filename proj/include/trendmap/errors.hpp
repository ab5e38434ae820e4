#pragma once

#include <stdexcept>
#include <string>

namespace trendmap {

/// Input file could not be read at all.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input was readable but does not match the expected format.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numeric step failed (empty model, singular covariance, ...).
struct compute_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace trendmap
