#include "bbm/rng.hpp"

namespace bbm {

namespace {

std::mt19937_64 seeded_engine(const StreamId& id) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(id.seed),      hi(id.seed),   lo(id.replicate),
                      hi(id.replicate), lo(id.stream), hi(id.stream),
                      0x62626d31u};
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(StreamId id) : id_(id), engine_(seeded_engine(id)) {}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential(double rate) {
    std::exponential_distribution<double> dist(rate);
    return dist(engine_);
}

std::size_t RngStream::uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

}  // namespace bbm
