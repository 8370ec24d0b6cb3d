#pragma once

#include <stdexcept>
#include <string>

namespace hevems {

/// Input or configuration that breaks a documented invariant (CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A model could not be evaluated: infeasible DP node, map query out of range (CLI exit code 3).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hevems
