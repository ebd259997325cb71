#include "levelstat/rng.hpp"

namespace levelstat {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(Philox4x32::Block& c, std::array<std::uint32_t, 2>& k) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    Philox4x32::Block out;
    out[0] = static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0];
    out[1] = static_cast<std::uint32_t>(p1);
    out[2] = static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1];
    out[3] = static_cast<std::uint32_t>(p0);
    c = out;
    k[0] += kWeyl0;
    k[1] += kWeyl1;
}

} // namespace

Philox4x32::Block Philox4x32::generate(Block counter, std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) round_once(counter, key);
    return counter;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t trial)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      trial_(trial) {}

void RngStream::refill() {
    Philox4x32::Block ctr{static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(trial_),
                          static_cast<std::uint32_t>(trial_ >> 32)};
    buf_ = Philox4x32::generate(ctr, key_);
    ++block_;
    used_ = 0;
}

std::uint64_t RngStream::next_u64() {
    if (used_ > 2) refill();
    std::uint64_t lo = buf_[used_];
    std::uint64_t hi = buf_[used_ + 1];
    used_ += 2;
    return (hi << 32) | lo;
}

double RngStream::u01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double half_width) {
    return half_width * (2.0 * u01() - 1.0);
}

double RngStream::triangular(double half_width) {
    return half_width * (u01() + u01() - 1.0);
}

} // namespace levelstat
