#pragma once

#include <stdexcept>
#include <string>

namespace reed {

// Error taxonomy shared by all modules. Everything derives from Error so
// callers can catch the whole family; the CLI maps ConfigError/ParamError/
// ParseError to exit code 1 and the rest to 2.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument values (domain-of-definition violations).
class ParamError : public Error {
public:
    using Error::Error;
};

// Malformed input data; carries a line number when one is known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Not enough records/capacity to satisfy a request.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Decoder state no longer matches the encoder's (wrong LM, params, or tokens).
class DesyncError : public Error {
public:
    using Error::Error;
};

// Vector/matrix dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// File system and serialization failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Config file invalid or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Upstream artifact does not match the current config/model (checksum mismatch).
class StaleArtifactError : public Error {
public:
    using Error::Error;
};

// Cover and stego means coincide; no direction can be derived.
class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

}  // namespace reed
