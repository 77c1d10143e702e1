#pragma once

namespace survode {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace survode
