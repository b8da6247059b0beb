#include "varlasso/rng.hpp"

#include <cmath>
#include <numbers>

namespace varlasso {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = std::uint64_t(a) * std::uint64_t(b);
    hi = std::uint32_t(p >> 32);
    lo = std::uint32_t(p);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed)
    : seed_(seed), key_{std::uint32_t(seed), std::uint32_t(seed >> 32)} {}

Philox4x32::Block Philox4x32::bijection(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

void Philox4x32::refill() {
    buffer_ = bijection(counter_, key_);
    // 128-bit increment
    for (auto& word : counter_) {
        if (++word != 0) break;
    }
    used_ = 0;
}

std::uint32_t Philox4x32::next_u32() {
    if (used_ == 4) refill();
    return buffer_[used_++];
}

std::uint64_t Philox4x32::next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
}

double Philox4x32::next_open01() {
    // (k + 0.5) / 2^53 for k in [0, 2^53) never hits 0 or 1.
    const std::uint64_t k = next_u64() >> 11;
    return (double(k) + 0.5) * 0x1.0p-53;
}

double NormalStream::next() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = engine_.next_open01();
    const double u2 = engine_.next_open01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

}  // namespace varlasso
