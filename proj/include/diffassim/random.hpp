#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace diffassim {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for (seed, tags...). Different tag
/// tuples give unrelated streams.
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {});

/// First draw of make_stream(seed, tags); used to hand sub-tasks their own seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

void fill_normal(Rng& rng, std::span<double> out);

}  // namespace diffassim
