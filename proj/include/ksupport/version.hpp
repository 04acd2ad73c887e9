#pragma once

namespace ksupport {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ksupport
