#ifndef EGCN_ERRORS_HPP
#define EGCN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace egcn {

/// Base class for all engine errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape mismatches, broken matrix invariants, malformed layer wiring.
class structural_error : public error {
public:
    explicit structural_error(const std::string& msg) : error(msg) {}
};

/// Out-of-range hyperparameters (negative sigma, lambda_max <= 0, ...).
class parameter_error : public error {
public:
    explicit parameter_error(const std::string& msg) : error(msg) {}
};

/// NaN/Inf values, eigendecomposition or power-iteration failure.
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& msg) : error(msg) {}
};

/// Malformed dataset files, bad labels, missing supervision.
class data_error : public error {
public:
    explicit data_error(const std::string& msg) : error(msg) {}
};

/// A sample does not fit the requested batch capacity.
class capacity_error : public error {
public:
    explicit capacity_error(const std::string& msg) : error(msg) {}
};

} // namespace egcn

#endif // EGCN_ERRORS_HPP
