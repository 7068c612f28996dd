#pragma once

namespace mcspi {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace mcspi
