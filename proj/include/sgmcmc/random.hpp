#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sgmcmc
{

//---------------------------------------------------------------------------//
/*!
 * Counter-based random stream built on Philox4x32-10.
 *
 * A stream is identified by a 64-bit key (the master seed) and a 64-bit
 * stream id; the remaining 64 bits of the Philox counter index blocks within
 * the stream. Distinct (seed, stream id) pairs give independent sequences, and
 * child streams are derived with split() so every replica, dataset and
 * tuning run owns its own sequence regardless of scheduling order.
 *
 * Only integer arithmetic and the libm calls in normal() are involved, so a
 * trajectory is bit-reproducible for a given (seed, stream id) on one
 * platform.
 */
class RngStream
{
  public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id)
    {
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    //! Derive an independent child stream.
    RngStream split(std::uint64_t child) const
    {
        return RngStream(seed_, mix64(stream_id_ ^ mix64(child + 0x632be59bd9b4e019ULL)));
    }

    std::uint32_t next_u32()
    {
        if (buffered_ == 0)
        {
            refill();
        }
        return block_[4 - buffered_--];
    }

    std::uint64_t next_u64()
    {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    //! Uniform double on the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    //! Uniform integer on [0, bound), Lemire's nearly-divisionless method.
    std::uint32_t uniform_index(std::uint32_t bound)
    {
        std::uint64_t product = std::uint64_t{next_u32()} * bound;
        auto low = static_cast<std::uint32_t>(product);
        if (low < bound)
        {
            std::uint32_t threshold = (0u - bound) % bound;
            while (low < threshold)
            {
                product = std::uint64_t{next_u32()} * bound;
                low = static_cast<std::uint32_t>(product);
            }
        }
        return static_cast<std::uint32_t>(product >> 32);
    }

    //! Standard normal draw (Box-Muller, second variate cached).
    double normal()
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        double radius = std::sqrt(-2.0 * std::log(uniform()));
        double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    static constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    using Block = std::array<std::uint32_t, 4>;

    //! Raw Philox4x32-10 bijection, exposed for known-answer tests.
    static Block philox(Block counter, std::array<std::uint32_t, 2> key)
    {
        constexpr std::uint32_t m0 = 0xD2511F53u;
        constexpr std::uint32_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round)
        {
            std::uint64_t p0 = std::uint64_t{m0} * counter[0];
            std::uint64_t p1 = std::uint64_t{m1} * counter[2];
            counter = {static_cast<std::uint32_t>(p1 >> 32) ^ counter[1] ^ key[0],
                       static_cast<std::uint32_t>(p1),
                       static_cast<std::uint32_t>(p0 >> 32) ^ counter[3] ^ key[1],
                       static_cast<std::uint32_t>(p0)};
            key[0] += w0;
            key[1] += w1;
        }
        return counter;
    }

  private:
    void refill()
    {
        Block ctr{static_cast<std::uint32_t>(block_index_),
                  static_cast<std::uint32_t>(block_index_ >> 32),
                  static_cast<std::uint32_t>(stream_id_),
                  static_cast<std::uint32_t>(stream_id_ >> 32)};
        block_ = philox(ctr, {static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)});
        ++block_index_;
        buffered_ = 4;
    }

    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t block_index_ = 0;
    Block block_{};
    int buffered_ = 0;
    double spare_ = 0;
    bool has_spare_ = false;
};

// Stream purposes, combined with an index through RngStream::split
enum class StreamPurpose : std::uint64_t
{
    dataset = 1,
    chain = 2,
    tuning = 3,
    reference = 4,
    brownian = 5,
    minibatch = 6,
    oracle = 7,
};

inline RngStream make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0)
{
    return RngStream(seed, static_cast<std::uint64_t>(purpose)).split(index);
}

} // namespace sgmcmc
