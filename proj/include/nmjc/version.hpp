// version.hpp — library version used in CSV provenance headers
#pragma once

namespace nmjc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace nmjc
