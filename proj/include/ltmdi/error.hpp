#pragma once

#include <stdexcept>
#include <string>

namespace ltmdi {

// kinds map onto CLI exit codes
enum class errc : int {
  invalid_input = 2,
  parse = 2,
  convergence = 3,
  missing_data = 4,
  infeasible = 5,
  singular = 5,
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace ltmdi
