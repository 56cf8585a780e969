#pragma once

namespace rwlp {
inline constexpr const char* kVersion = "0.1.0";
}
