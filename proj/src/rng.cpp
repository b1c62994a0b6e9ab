#include "v2t/rng.hpp"

#include <cmath>
#include <numbers>

namespace v2t {

double Rng::normal() {
    // Box-Muller, cosine branch only. u1 is kept away from 0 so the log is finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::hash_label(std::string_view label) {
    // FNV-1a 64.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace v2t
