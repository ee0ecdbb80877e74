#pragma once

#include <stdexcept>
#include <string>

namespace mtc {

// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape contract violations (bad rank, mismatched extents).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid argument values (negative lambda, label out of range, ...).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

// Malformed file contents (bad magic, truncated stream, bad header).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failures (missing file, failed write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Training-time failures; carries the offending step index.
class TrainError : public Error {
public:
    TrainError(const std::string& msg, std::size_t step) : Error(msg), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

}  // namespace mtc
