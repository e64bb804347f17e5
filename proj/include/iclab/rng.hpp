#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace iclab {

// Counter-based deterministic randomness. Every draw is a pure function of
// (master_seed, stream_id, draw_index), so independent streams can be consumed
// from worker threads in any order without changing what each stream yields.

uint64_t mix64(uint64_t z);              // splitmix64 finalizer, bijective
uint64_t fnv1a64(std::string_view s);

struct RngSpec {
    uint64_t master_seed = 0;
    uint64_t stream_id = 0;

    // Derive a child stream from a human-readable tag.
    RngSpec substream(std::string_view tag) const;
};

class RngStream {
public:
    explicit RngStream(RngSpec spec);
    RngStream(uint64_t master_seed, std::string_view tag);

    uint64_t next_u64();
    double uniform01();                          // [0, 1), 53-bit resolution
    double uniform(double lo, double hi);
    double gaussian();                           // standard normal, Marsaglia polar
    int categorical(const std::vector<double>& probs);  // index by cumulative mass
    int uniform_int(int n);                      // {0, ..., n-1}

    uint64_t draws() const { return counter_; }

private:
    uint64_t base_;
    uint64_t salt_;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace iclab
