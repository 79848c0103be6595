#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mgcn {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer configurations that do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (counts, rates, fractions, names).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem and decoding failures.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed checkpoint or report files.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Misuse of the gradient tape.
class AutogradError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, std::size_t batch)
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                std::to_string(batch)),
          epoch_(epoch),
          batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

}  // namespace mgcn
