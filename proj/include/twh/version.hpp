#pragma once

namespace twh {
inline constexpr const char* kVersion = "0.1.0";
}
