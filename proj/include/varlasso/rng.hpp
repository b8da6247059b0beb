#pragma once

#include <array>
#include <cstdint>

namespace varlasso {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit seed is the key; the 128-bit counter advances by one per block
/// of four 32-bit outputs. Output depends only on (seed, position), so a
/// replication r seeded with base_seed + r reproduces regardless of which
/// worker runs it or in what order.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed = 0);

    /// Raw block function, exposed for known-answer tests.
    static Block bijection(Block counter, Key key);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double next_open01();

    std::uint64_t seed() const { return seed_; }

private:
    void refill();

    std::uint64_t seed_;
    Key key_;
    Block counter_{0, 0, 0, 0};
    Block buffer_{};
    int used_ = 4;
};

/// Standard normal draws by the Box-Muller transform over a Philox stream.
/// Each call to next() consumes two 53-bit uniforms per pair of normals;
/// the second normal of a pair is cached.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next();

private:
    Philox4x32 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace varlasso
