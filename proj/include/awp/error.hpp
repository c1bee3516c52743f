#pragma once

#include <stdexcept>
#include <string>

namespace awp {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Bad arguments, incompatible inputs, unknown labels.
class ValidationError : public Error {
public:
    using Error::Error;
};

class VocabError : public Error {
public:
    using Error::Error;
};

/// Malformed input files. Subclasses distinguish the failure.
class ParseError : public Error {
public:
    using Error::Error;
};

class FormatError : public ParseError {
public:
    using ParseError::ParseError;
};

class VersionError : public ParseError {
public:
    using ParseError::ParseError;
};

class TruncatedError : public ParseError {
public:
    using ParseError::ParseError;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DivisionError : public Error {
public:
    using Error::Error;
};

/// Numeric failures (NaN loss) during base training.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Numeric failures (NaN loss) during the weight-space attack.
class AttackError : public Error {
public:
    using Error::Error;
};

}  // namespace awp
