#ifndef GEB_ERRORS_HPP
#define GEB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace geb {

// Invalid configuration (bad parameter ranges, malformed config files).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// Numeric failure detected during evaluation (non-finite values, violated guards).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace geb

#endif
