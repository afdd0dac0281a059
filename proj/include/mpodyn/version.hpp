#pragma once

namespace mpodyn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mpodyn
