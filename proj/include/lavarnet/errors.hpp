#ifndef LAVARNET_ERRORS_HPP
#define LAVARNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lavarnet {

// Violated precondition of an operation (wrong variant, index out of range,
// non-scalar loss, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Operand shapes do not conform. The message names both shapes.
class DimensionError : public ContractError {
public:
    using ContractError::ContractError;
};

// Malformed or unusable input data (parse failures, empty splits, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A synthetic generator could not produce a usable trajectory.
class GenerationError : public DataError {
public:
    using DataError::DataError;
};

// Training hit a non-finite loss.
class TrainingAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lavarnet

#endif  // LAVARNET_ERRORS_HPP
