#include "bhc/rng.hpp"

#include <cmath>

namespace bhc {

namespace {

constexpr std::uint32_t M0 = 0xD2511F53u;
constexpr std::uint32_t M1 = 0xCD9E8D57u;
constexpr std::uint32_t W0 = 0x9E3779B9u;  // golden-ratio Weyl increments
constexpr std::uint32_t W1 = 0xBB67AE85u;

inline void round_once(std::uint32_t x[4], std::uint32_t k0, std::uint32_t k1) {
    std::uint64_t p0 = static_cast<std::uint64_t>(M0) * x[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(M1) * x[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    std::uint32_t y0 = hi1 ^ x[1] ^ k0;
    std::uint32_t y1 = lo1;
    std::uint32_t y2 = hi0 ^ x[3] ^ k1;
    std::uint32_t y3 = lo0;
    x[0] = y0;
    x[1] = y1;
    x[2] = y2;
    x[3] = y3;
}

}  // namespace

Philox::Block Philox::block(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3,
                            std::uint32_t k0, std::uint32_t k1) {
    Block b{{c0, c1, c2, c3}};
    for (int r = 0; r < 10; ++r) {
        round_once(b.x, k0, k1);
        k0 += W0;
        k1 += W1;
    }
    return b;
}

Philox::Philox(std::uint64_t key, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(key);
    key_[1] = static_cast<std::uint32_t>(key >> 32);
    stream_[0] = static_cast<std::uint32_t>(stream);
    stream_[1] = static_cast<std::uint32_t>(stream >> 32);
}

void Philox::refill() {
    buf_ = block(static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                 stream_[0], stream_[1], key_[0], key_[1]);
    ++counter_;
    used_ = 0;
}

std::uint32_t Philox::next_u32() {
    if (used_ == 4) refill();
    return buf_.x[used_++];
}

double Philox::uniform() {
    std::uint64_t hi = next_u32(), lo = next_u32();
    std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

double Philox::exponential() {
    double u;
    do {
        u = uniform();
    } while (u == 0.0);
    return -std::log(u);
}

}  // namespace bhc
