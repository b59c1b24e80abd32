#pragma once

#include <cstdio>
#include <string>

namespace evoprune {

// Full-precision double formatting; %.17g round-trips exactly, which is what
// keeps results logs byte-reproducible.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace evoprune
