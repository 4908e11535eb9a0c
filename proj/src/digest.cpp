#include "leamatch/digest.hpp"

#include <cstdio>

namespace leamatch {

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

}  // namespace leamatch
