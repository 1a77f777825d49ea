#pragma once

namespace nmstpp {

inline constexpr const char* kVersion = "0.1.0";

}
