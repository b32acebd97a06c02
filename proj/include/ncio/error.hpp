#pragma once

#include <stdexcept>
#include <string>

namespace ncio {

enum class Errc {
  invalid_argument,
  overflow,
  io_error,
  unsupported,        // backend cannot provide byte-range locks
  fallback_required,  // sieved write refused; caller must issue per-segment writes
  beyond_eof,         // a requested byte lies past end-of-file
  protocol,           // mismatched collective participation, deadlock
  timeout,
  aborted,            // another rank of the group failed
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ncio
