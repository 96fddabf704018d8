#include "diffassim/random.hpp"

#include <vector>

namespace diffassim {

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * tags.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto t : tags) push(t);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    Rng rng = make_stream(seed, tags);
    return rng();
}

void fill_normal(Rng& rng, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out) v = normal(rng);
}

}  // namespace diffassim
