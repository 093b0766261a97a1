#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace floqskin {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

/// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad parameters, bad config, violated preconditions.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Irrational flux has no Bloch form.
class UnsupportedRepresentation : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Operation called on a model it does not apply to (e.g. q != 2 reciprocity check).
class WrongModel : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Numerical failure: defective propagator, overflow, empty results.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularContinuation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class PropagationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DefectivePropagator : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace floqskin
