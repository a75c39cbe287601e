#pragma once

#include <stdexcept>
#include <string>

namespace insight {

// Bad input data: unreadable CSV, unknown attribute, degenerate column.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration document or hyperparameter value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A detector precondition failed for one combination (zero variance, too few
// rows, ...). The engine drops that method for the combination.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A method produced output that breaks its declared contract.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace insight
