#ifndef STFE_ERRORS_HPP
#define STFE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stfe {

/// A caller broke a documented precondition (point outside its box, bad interval, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The activation does not have the secant-then-function envelope shape on the
/// requested interval, so the recursive envelope formula does not apply.
class NotStfeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a relaxation LP turns out infeasible, which means the upstream
/// activation bounds were inconsistent.
class InconsistentBoundsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace stfe

#endif // STFE_ERRORS_HPP
