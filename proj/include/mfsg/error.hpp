#pragma once

#include <stdexcept>
#include <string>

namespace mfsg {

// Invalid parameter combinations (orders, penalty ranges, fold counts).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Evaluation points or curve samples outside a basis domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Rank deficiency, non-PD Gram matrices, failed factorizations.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files; carries a row/column diagnostic in the message.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mfsg
