#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eegaze {

// Base class for all library-level failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a serialized stream (EEGR dataset or EEGM checkpoint) is
// malformed. The kind distinguishes the failure so callers and tests can
// tell a corrupted magic from a truncation.
struct FormatError : Error {
    enum class Kind {
        bad_magic,
        bad_version,
        truncated,
        count_mismatch,
        config_mismatch,
    };

    FormatError(Kind k, const std::string& msg) : Error(msg), kind(k) {}

    Kind kind;
};

// Raised by the training loop when the loss goes non-finite.
struct DivergenceError : Error {
    DivergenceError(std::size_t epoch_, std::size_t batch_, const std::string& msg)
        : Error(msg), epoch(epoch_), batch(batch_) {}

    std::size_t epoch;
    std::size_t batch;
};

} // namespace eegaze
