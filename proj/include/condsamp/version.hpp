#pragma once

namespace condsamp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace condsamp
