#pragma once

namespace stpp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stpp
