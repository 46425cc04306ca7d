#pragma once

namespace sonic {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sonic
