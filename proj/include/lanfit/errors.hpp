#ifndef LANFIT_ERRORS_HPP
#define LANFIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lanfit {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (CSV schema, negative counts, ...).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

/// A mathematically undefined operation: log of a nonpositive rate,
/// zero to a negative power, a vanishing denominator.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// An estimation procedure failed (divergence, singular Hessian, ...).
class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error(what) {}
};

} // namespace lanfit

#endif
