#pragma once

namespace ftsbench {

inline constexpr const char* kToolVersion = "ftsbench 0.1.0";

}  // namespace ftsbench
