#pragma once

#include <stdexcept>
#include <string>

namespace efc {

enum class ErrorKind {
    usage = 1,    // bad arguments, malformed config, precondition violated
    numeric = 2,  // solver divergence, singular system, non-finite values
    io = 3,       // missing or unreadable file, write failure, schema mismatch
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& what) { throw Error(ErrorKind::usage, what); }
[[noreturn]] inline void fail_numeric(const std::string& what) { throw Error(ErrorKind::numeric, what); }
[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::io, what); }

}  // namespace efc
