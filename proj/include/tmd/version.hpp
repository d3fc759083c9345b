#pragma once

namespace tmd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tmd
