#ifndef QPGL_RNG_HPP
#define QPGL_RNG_HPP

#include <complex>
#include <cstdint>

namespace qpgl {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so parallel tasks derive independent deterministic streams
// from their task index and replays are bit-identical at any worker count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(mix(seed) ^ (0x9E3779B97F4A7C15ULL * (stream + 1)))) {}

    std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi], inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(
                        static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * span) >> 64));
    }

    // uniform in the closed complex disk of the given radius
    std::complex<double> disk(double radius) {
        for (;;) {
            const double u = uniform(-1.0, 1.0);
            const double v = uniform(-1.0, 1.0);
            if (u * u + v * v <= 1.0) return {u * radius, v * radius};
        }
    }

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace qpgl

#endif
