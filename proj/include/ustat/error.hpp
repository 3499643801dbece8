#ifndef USTAT_ERROR_HPP_
#define USTAT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace ustat {

// Numeric values are shared with the C API status codes in ustat.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kNumerical = 3,
  kIo = 4,
  kConvergence = 5,
  kInternal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace ustat

#endif  // USTAT_ERROR_HPP_
