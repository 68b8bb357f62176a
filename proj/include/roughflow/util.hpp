#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace roughflow {

/// Chunked parallel map over [0, n).  Work items must write to disjoint
/// slots; the reduction order afterwards is the caller's (deterministic).
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Van der Corput radical inverse in the given base.
inline double radical_inverse(std::uint64_t i, std::uint32_t base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * double(i % base);
        i /= base;
    }
    return r;
}

/// Seeded Halton stream: seed only offsets the index, so a fixed seed yields
/// an identical deterministic point set.
class HaltonSampler {
  public:
    explicit HaltonSampler(std::uint64_t seed) {
        // splitmix64 scrambling of the seed into a start index
        std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        x ^= x >> 31;
        offset_ = 64 + (x % (1u << 20));
    }

    /// dim < 4; consecutive calls with the same dim walk the stream.
    double next(int dim) {
        static constexpr std::uint32_t bases[4] = {2, 3, 5, 7};
        return radical_inverse(offset_ + idx_[dim]++, bases[dim]);
    }

    /// One 3D point, advancing all dimensions in lockstep.
    void next3(double& a, double& b, double& c) {
        const std::uint64_t i = offset_ + lockstep_++;
        a = radical_inverse(i, 2);
        b = radical_inverse(i, 3);
        c = radical_inverse(i, 5);
    }

  private:
    std::uint64_t offset_ = 0;
    std::uint64_t idx_[4] = {0, 0, 0, 0};
    std::uint64_t lockstep_ = 0;
};

/// FNV-1a over a byte string; used for run-manifest provenance hashes.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace roughflow
