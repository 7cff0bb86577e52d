#pragma once

#include <cstdint>

namespace bhc {

// Philox 4x32 with 10 rounds: a counter-based generator. Each (key, stream)
// pair is an independent sequence, so trajectory i of a run seeded with s
// always sees the same numbers no matter how work is scheduled across
// threads. key = master seed, stream = trajectory index.
class Philox {
  public:
    Philox(std::uint64_t key, std::uint64_t stream);

    std::uint32_t next_u32();
    // 53-bit uniform in [0, 1).
    double uniform();
    // Unit-mean exponential deviate, strictly positive.
    double exponential();

    struct Block {
        std::uint32_t x[4];
    };
    // One keyed block; exposed for the known-answer test.
    static Block block(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3,
                       std::uint32_t k0, std::uint32_t k1);

  private:
    void refill();

    std::uint32_t key_[2];
    std::uint32_t stream_[2];
    std::uint64_t counter_ = 0;
    Block buf_{};
    int used_ = 4;
};

}  // namespace bhc
