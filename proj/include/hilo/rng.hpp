// Deterministic random streams. One root seed is split per purpose so that
// enabling/disabling one consumer never shifts another consumer's stream.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string_view>

namespace hilo {

// Derive an independent stream seed from (root, purpose, index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0);

// mt19937_64 engine with explicit, portable transforms (the raw engine output is
// specified by the standard; distribution objects are not, so we avoid them).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return eng_() % n; }

    // Standard normal via Box-Muller (pairs cached).
    double normal();

    Eigen::Vector3d normal3() {
        double x = normal(), y = normal(), z = normal();
        return {x, y, z};
    }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hilo
