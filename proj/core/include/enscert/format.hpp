#pragma once

#include <cstdio>
#include <string>

namespace enscert {

/// 17-significant-digit decimal encoding; round-trips finite doubles exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace enscert
