#pragma once

#include <stdexcept>
#include <string>

namespace rcmps {

/// Base class for every error raised by the library.
class RcmpsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

class DomainError : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

/// The generator has more than one (numerical) fixed point; the state is
/// reducible or too close to the vacuum to define a unique environment.
class DegenerateSteadyState : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

class StepUnderflow : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

class SingularMetric : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

class LineSearchFailed : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

class ConfigError : public RcmpsError {
public:
    using RcmpsError::RcmpsError;
};

} // namespace rcmps
