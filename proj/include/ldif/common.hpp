#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ldif {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Box3 = Eigen::AlignedBox3d;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Inverse of sigmoid on (0,1).
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// I/O and validation failures; the CLI maps these to exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss during optimization; the CLI maps this to exit code 1.
struct DivergedError : std::runtime_error {
    int step;
    DivergedError(const std::string& msg, int step_) : std::runtime_error(msg), step(step_) {}
};

// Deterministic random stream. Wraps mt19937_64 with hand-rolled
// distributions so results do not depend on the standard library's
// distribution implementations. Substreams are derived from the
// original seed by hashing a name or index, so all randomness in a
// run flows from a single root seed.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    // Named substream (e.g. "init", "sample", "metrics").
    Rng sub(std::string_view name) const {
        uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ull;
        for (char c : name) h = (h ^ static_cast<uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ull;
        return Rng(mix(h));
    }

    Rng sub(uint64_t index) const { return Rng(mix(seed_ ^ (0xd1b54a32d192ed03ull + index * 0x9e3779b97f4a7c15ull))); }

    uint64_t next() { return gen_(); }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    size_t below(size_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = next(); } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    // Standard normal via Box-Muller (cached spare kept for determinism).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    Vec3 normal3() {
        double a = normal(), b = normal(), c = normal();
        return Vec3(a, b, c);
    }

    Vec3 unit_vector() {
        Vec3 v;
        double n2;
        do {
            v = normal3();
            n2 = v.squaredNorm();
        } while (n2 < 1e-12);
        return v / std::sqrt(n2);
    }

    uint64_t seed() const { return seed_; }

  private:
    static uint64_t mix(uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {
inline std::atomic<int>& thread_count_storage() {
    static std::atomic<int> n{0};  // 0 = hardware concurrency
    return n;
}
}  // namespace detail

inline void set_num_threads(int n) { detail::thread_count_storage().store(n); }

inline int num_threads() {
    int n = detail::thread_count_storage().load();
    if (n > 0) return n;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(chunk_index, begin, end) over [0,n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the thread
// count, so per-chunk partial results can be reduced in chunk order for
// bit-identical results at any --threads setting.
template <typename Fn>
void parallel_chunks(size_t n, size_t chunk_size, const Fn& fn) {
    if (n == 0) return;
    size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    int workers = std::min<size_t>(num_threads(), n_chunks);
    if (workers <= 1) {
        for (size_t c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t c = next.fetch_add(1);
                if (c >= n_chunks) break;
                fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
            }
        });
    }
    for (auto& t : pool) t.join();
}

inline size_t n_chunks_for(size_t n, size_t chunk_size) { return n == 0 ? 0 : (n + chunk_size - 1) / chunk_size; }

}  // namespace ldif
