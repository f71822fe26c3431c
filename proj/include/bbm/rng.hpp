#pragma once

#include <cstdint>
#include <random>

namespace bbm {

/// Identifies one reproducible random stream: a run seed plus a
/// (replicate, stream) pair. Equal ids always give the same sequence.
struct StreamId {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Per-task random stream. Never shared between threads.
class RngStream {
public:
    explicit RngStream(StreamId id);
    RngStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream = 0)
        : RngStream(StreamId{seed, replicate, stream}) {}

    const StreamId& id() const { return id_; }

    double uniform();                       // [0, 1)
    double normal();                        // N(0, 1)
    double exponential(double rate);        // mean 1/rate
    std::size_t uniform_index(std::size_t n);  // {0, ..., n-1}

    /// A child stream with the same seed and replicate but a different stream
    /// index. Used to hand independent streams to sibling sub-forests.
    RngStream derive(std::uint64_t stream) const {
        return RngStream(StreamId{id_.seed, id_.replicate, stream});
    }

    std::mt19937_64& engine() { return engine_; }

private:
    StreamId id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bbm
