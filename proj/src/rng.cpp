#include "iclab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace iclab {

uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

RngSpec RngSpec::substream(std::string_view tag) const {
    return RngSpec{master_seed, mix64(stream_id ^ fnv1a64(tag))};
}

RngStream::RngStream(RngSpec spec)
    : base_(mix64(spec.master_seed)), salt_(mix64(spec.stream_id ^ 0xA3C59AC2ED9054BDULL)) {}

RngStream::RngStream(uint64_t master_seed, std::string_view tag)
    : RngStream(RngSpec{master_seed, 0}.substream(tag)) {}

uint64_t RngStream::next_u64() {
    // Two finalizer rounds over (seed base, stream salt, counter).
    return mix64(mix64(base_ + counter_++) ^ salt_);
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double RngStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

int RngStream::categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty probability vector");
    const double u = uniform01();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;  // guard against fp shortfall
}

int RngStream::uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection-free for our small n; bias below 2^-53 is irrelevant here.
    int k = static_cast<int>(uniform01() * n);
    return k < n ? k : n - 1;
}

}  // namespace iclab
