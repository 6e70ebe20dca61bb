#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gms {

// splitmix64, used to expand seeds and derive sub-streams.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64. Same seed yields the same stream on
// every platform; all randomized behavior in the project goes through this.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0,n)
    uint64_t below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // standard normal via Box-Muller (spare discarded to keep the stream
    // position a pure function of the draw count)
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates
    template <typename Vec>
    void shuffle(Vec& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent sub-stream seed, e.g. per (epoch, sample).
    static uint64_t derive(uint64_t master, uint64_t a, uint64_t b = 0) {
        uint64_t s = master;
        splitmix64(s);
        s ^= 0x9e3779b97f4a7c15ULL * (a + 1);
        splitmix64(s);
        s ^= 0xd1b54a32d192ed03ULL * (b + 1);
        return splitmix64(s);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> state_;
};

}  // namespace gms
