#pragma once

#include <stdexcept>
#include <string>

namespace dabc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or argument combination.
class ParameterError : public Error
{
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation (non-positive depth, bad label).
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Tensor or image dimensions that do not fit together.
class ShapeError : public Error
{
public:
    using Error::Error;
};

/// A probability vector or score volume that is not normalized.
class ValidationError : public Error
{
public:
    using Error::Error;
};

/// Metrics requested over zero valid pixels.
class EmptyEvaluationError : public Error
{
public:
    using Error::Error;
};

/// Loss requested over zero valid pixels.
class EmptyBatchError : public Error
{
public:
    using Error::Error;
};

/// Unreadable or inconsistent file on disk. The message names the file.
class IngestionError : public Error
{
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error
{
public:
    using Error::Error;
};

} // namespace dabc
