#pragma once

#include <stdexcept>
#include <string>

namespace mergelab {

// Base for every error raised by the library. Callers that only care about
// "did it work" can catch this; the subclasses exist for tests and for the
// CLI to pick exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent checkpoint container.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Inputs that violate an operation's preconditions (bad weight, length
// mismatch, empty score map, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Two checkpoints that cannot be merged tensor-by-tensor.
class MergeError : public Error {
public:
    using Error::Error;
};

// A score outside [0,1], a missing metric, a malformed score file.
class ScoreError : public Error {
public:
    using Error::Error;
};

}  // namespace mergelab
