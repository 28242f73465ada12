#pragma once

namespace skillmind {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace skillmind
