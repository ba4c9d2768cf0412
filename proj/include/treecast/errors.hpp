#pragma once

#include <stdexcept>

namespace treecast {

// Shared error taxonomy. The CLI maps parameter/shape/size/state/validation
// and degenerate-evidence errors to exit code 2, io_error to exit code 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parameter_error : error {
    using error::error;
};

struct shape_error : error {
    using error::error;
};

struct size_error : error {
    using error::error;
};

struct state_error : error {
    using error::error;
};

struct validation_error : error {
    using error::error;
};

// All-zero likelihood: every root state is ruled out by the evidence.
// Possible only at |lambda| = 1.
struct degenerate_evidence_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

}  // namespace treecast
