#pragma once

namespace ltmdi {
inline constexpr const char* k_version = "0.1.0";
}
