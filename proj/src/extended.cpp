#include "bbm/extended.hpp"

#include <cstdio>

namespace bbm {

std::string ExtendedReal::to_string() const {
    switch (kind_) {
        case Kind::plus_infinity: return "inf";
        case Kind::minus_infinity: return "-inf";
        case Kind::finite: break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    return buf;
}

}  // namespace bbm
