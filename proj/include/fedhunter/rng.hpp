#ifndef FEDHUNTER_RNG_HPP
#define FEDHUNTER_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fedhunter {

// Deterministic random source. mt19937_64 has a standard-specified output
// sequence, and the distributions below are hand-rolled so draws never
// depend on the C++ library's (implementation-defined) distribution code.
class Rng {
   public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0,1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0,n), n >= 1; rejection keeps it unbiased
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

   private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fedhunter

#endif
