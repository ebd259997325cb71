#pragma once

#include <array>
#include <cstdint>

namespace levelstat {

// Philox4x32-10 counter-based generator. A (key, counter) pair maps to four
// 32-bit words with no sequential state, so trial t can be generated on any
// worker and the stream is identical for a fixed seed.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;

    // counter = (c0, c1, c2, c3), key = (k0, k1)
    static Block generate(Block counter, std::array<std::uint32_t, 2> key);
};

// Stream of doubles for one (seed, trial) pair. Key carries the seed, the
// counter carries (trial, block index). Each u01 consumes exactly one 64-bit
// word so the draw count per trial is a pure function of the sampling plan.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t trial);

    double u01();                      // uniform [0,1), 53-bit mantissa
    double uniform(double half_width); // uniform on [-M, M]
    double triangular(double half_width); // symmetric triangular on [-M, M], two draws
    std::uint64_t next_u64();

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t trial_;
    std::uint64_t block_ = 0;
    Philox4x32::Block buf_{};
    int used_ = 4; // words consumed from buf_
    void refill();
};

} // namespace levelstat
