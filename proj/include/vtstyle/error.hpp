#pragma once

#include <stdexcept>
#include <string>

namespace vts {

// Base for every error raised by the harness. Subclasses map onto CLI exit
// codes: configuration and validation problems exit 2, everything else 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Retries exhausted or connection failure. The query cell is marked failed.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Non-retryable HTTP status (4xx). Aborts the phase.
class HttpStatusError : public Error {
 public:
  HttpStatusError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class CacheError : public Error {
 public:
  using Error::Error;
};

class ScriptError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A stratum is missing response cells; analysis refuses to run.
class IncompleteDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace vts
