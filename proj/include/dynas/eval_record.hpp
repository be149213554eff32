#pragma once

#include <cstdint>

#include "dynas/common.hpp"

namespace dynas {

/// One function evaluation; `index` is the 1-based evaluation counter.
struct EvalRecord {
  std::int64_t index = 0;
  Vector x;
  double f = 0.0;
};

}  // namespace dynas
