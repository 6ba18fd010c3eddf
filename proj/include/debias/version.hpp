#pragma once

namespace debias {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace debias
