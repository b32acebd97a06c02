#pragma once

#include <cstdint>

#include "ncio/error.hpp"

namespace ncio::detail {

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw Error(Errc::overflow, "offset arithmetic exceeds 63 bits");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(Errc::overflow, "offset arithmetic exceeds 63 bits");
  return r;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace ncio::detail
