#pragma once

#include <stdexcept>
#include <string>

namespace linrl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's contract (bad argument, wrong call order).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Vector or screen dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A pixel outside the 7-bit color range, or a malformed screen payload.
class MalformedScreen : public Error {
 public:
  using Error::Error;
};

/// File content could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bridge peer sent something that is not valid protocol.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, const std::string& line)
      : Error(what + ": \"" + line + "\""), line_(line) {}

  const std::string& line() const noexcept { return line_; }

 private:
  std::string line_;
};

/// Bridge peer closed its end of the connection.
class PeerClosed : public Error {
 public:
  using Error::Error;
};

}  // namespace linrl
