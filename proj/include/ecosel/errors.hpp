#pragma once

#include <stdexcept>
#include <string>

namespace ecosel {

/// Machine-parseable failure classes. Every error raised by the library
/// carries exactly one of these; the CLI maps them to exit codes.
enum class ErrorClass {
  Config,    ///< bad configuration, bad arguments, shape mismatches
  Data,      ///< unreadable or degenerate input data
  Numeric,   ///< numerical failure (collinearity, conditioning)
  Capacity,  ///< problem size beyond the supported range
};

inline const char* error_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::Config: return "E_CONFIG";
    case ErrorClass::Data: return "E_DATA";
    case ErrorClass::Numeric: return "E_NUMERIC";
    case ErrorClass::Capacity: return "E_CAPACITY";
  }
  return "E_UNKNOWN";
}

/// Process exit code for an error class (0 is success, 1 is reserved for
/// verification failures).
inline int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::Config: return 2;
    case ErrorClass::Data: return 3;
    case ErrorClass::Numeric: return 4;
    case ErrorClass::Capacity: return 2;
  }
  return 2;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string message)
      : std::runtime_error(std::move(message)), cls_(cls) {}

  ErrorClass cls() const { return cls_; }
  const char* code() const { return error_code(cls_); }

 private:
  ErrorClass cls_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorClass::Config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorClass::Data, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorClass::Numeric, msg); }
[[noreturn]] inline void throw_capacity(const std::string& msg) { throw Error(ErrorClass::Capacity, msg); }

}  // namespace ecosel
