#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace invlab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output
/// block is a pure function of (key, counter), so any draw of any stream can be
/// produced without touching other streams.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key) {
        for (int round = 0; round < 10; ++round) {
            counter = single_round(counter, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return counter;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Block single_round(const Block& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Identifies which part of a path consumes a stream, so that enabling one
/// feature (e.g. jumps) never shifts the draws of another.
enum class RngPurpose : std::uint32_t {
    Diffusion = 1,
    Tail = 2,
    Bridge = 3,
    Clocks = 4,
    Jumps = 5,
    Oracle = 6,
};

struct RngSpec {
    std::uint64_t master_seed = 0;
};

/// Sequential draws from one (seed, stream, purpose) triple.
class PathRng {
public:
    PathRng(std::uint64_t master_seed, std::uint64_t stream_id, RngPurpose purpose)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32) ^
                     (static_cast<std::uint32_t>(purpose) << 24)) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() {
        if (cursor_ == 2) refill();
        return buffer_[cursor_++];
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double exponential() { return -std::log(uniform()); }

private:
    void refill() {
        const Philox4x32::Block out = Philox4x32::generate(
            {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
             stream_lo_, stream_hi_},
            key_);
        ++counter_;
        buffer_[0] = to_unit(out[0], out[1]);
        buffer_[1] = to_unit(out[2], out[3]);
        cursor_ = 0;
    }

    static double to_unit(std::uint32_t a, std::uint32_t b) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t counter_ = 0;
    std::array<double, 2> buffer_{};
    int cursor_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace invlab
