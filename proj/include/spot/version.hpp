#pragma once

namespace spot {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spot
