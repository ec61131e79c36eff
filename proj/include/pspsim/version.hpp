#pragma once

namespace pspsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pspsim
