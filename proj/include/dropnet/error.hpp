#pragma once

#include <stdexcept>
#include <string>

namespace dropnet {

enum class ErrorCode {
  invalid_argument,   // bad input, violated precondition
  shape_mismatch,     // dimension / length mismatch
  unsupported_model,  // operation needs an enumerable model
  budget_exceeded,    // doubling cap or fit budget exhausted
  numeric,            // non-finite intermediate (fit diverged, overflow)
  io,                 // file read/write failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); }
[[noreturn]] inline void throw_shape(const std::string& msg) { throw Error(ErrorCode::shape_mismatch, msg); }
[[noreturn]] inline void throw_unsupported(const std::string& msg) { throw Error(ErrorCode::unsupported_model, msg); }
[[noreturn]] inline void throw_budget(const std::string& msg) { throw Error(ErrorCode::budget_exceeded, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorCode::numeric, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorCode::io, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace dropnet
