#pragma once

namespace depulse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace depulse
