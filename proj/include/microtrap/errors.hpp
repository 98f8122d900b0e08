#pragma once

#include <stdexcept>
#include <string>

namespace microtrap
{
// Base of every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Invalid arguments: out-of-domain parameters, dimension mismatches, bad geometry.
class DomainError : public Error
{
public:
    using Error::Error;
};

// Malformed configuration: schema violations, unit mismatches, missing files.
class ConfigError : public Error
{
public:
    using Error::Error;
};

// A numerical procedure failed to produce an answer.
class NumericalError : public Error
{
public:
    using Error::Error;
};

class BoundaryPointError : public DomainError
{
public:
    using DomainError::DomainError;
};

class SelfIntersectionError : public DomainError
{
public:
    using DomainError::DomainError;
};

class SingularSystemError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class NonConvergenceError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class NoMinimumError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class ContinuationBreakError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class SaddlePointError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class InfeasibleBoundError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class NoFeasibleCandidateError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

} // namespace microtrap
