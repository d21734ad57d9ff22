#include "chase/rng.hpp"

#include <cmath>

namespace chase {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix(std::uint64_t& s) {
    std::uint64_t z = (s += kGolden);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * kGolden + 0x632BE59BD9B4E019ULL);
    std::uint64_t z = splitmix(s);
    return z ^ splitmix(s);
}

inline std::uint64_t fnv1a(std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : root_(seed), state_(seed) {}

Rng Rng::stream(std::uint64_t key) const { return Rng(mix2(root_, key)); }

Rng Rng::stream(std::string_view name) const { return stream(fnv1a(name)); }

std::uint64_t Rng::next_u64() { return splitmix(state_); }

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
    // u1 in (0,1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n < 2) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::vector<std::uint32_t> Rng::permutation(std::uint32_t n) {
    std::vector<std::uint32_t> p(n);
    for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
}

}  // namespace chase
