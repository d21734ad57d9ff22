#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace chase {

// Counter-based splittable generator (splitmix64 core). Every consumer of
// randomness derives a named child stream from its parent *before* drawing,
// so generation order never changes results and independent jobs (pairs,
// seeds, folds, dropout passes) can run in any schedule.
//
// Stream names in use across the project:
//   dataset:  "pair"/<pair_id>, "layout"
//   training: "init", "shuffle", "dropout", "selector_split", "pairs"
//   scoring:  "mc"/<pass>/<sequence_id>
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Child stream derivation; independent of draws made on this generator.
    Rng stream(std::uint64_t key) const;
    Rng stream(std::string_view name) const;

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; one value per call (no cached spare,
    // so draw counts stay predictable for stream accounting).
    double normal();

    // Unbiased integer on [0, n) via rejection.
    std::uint64_t below(std::uint64_t n);
    // Inclusive range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    std::vector<std::uint32_t> permutation(std::uint32_t n);

private:
    std::uint64_t root_;   // fixed at construction; children derive from this
    std::uint64_t state_;  // advances with draws
};

}  // namespace chase
