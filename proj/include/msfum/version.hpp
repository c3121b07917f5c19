#pragma once

namespace msfum {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace msfum
