#pragma once

#include <stdexcept>
#include <string>

namespace sae {

/// Malformed input data (CSV rows, config files, dataset invariants).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arithmetic failure: singular systems, degenerate simulation targets.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A method/link combination the library deliberately does not provide.
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sae
