#pragma once

namespace corrdiff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace corrdiff
