#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>

#include "diffassim/denoiser.hpp"
#include "diffassim/dynamics.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* env = std::getenv("DIFFASSIM_TEST_TMP");
    auto base = env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "diffassim_tests";
    auto dir = base / name;
    std::filesystem::create_directories(dir);
    return dir;
}

inline diffassim::Field random_field(int levels, int points, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    diffassim::Field f(levels, points);
    for (double& v : f.values()) v = n(rng);
    return f;
}

inline diffassim::NormStats unit_norm(int levels) {
    return {std::vector<double>(levels, 0.0), std::vector<double>(levels, 1.0), std::vector<double>(levels, 1.0)};
}

// Small but non-trivial network with every layer randomized, output layer included.
inline diffassim::DenoiserParams random_denoiser(const diffassim::DenoiserArch& arch, std::uint64_t seed,
                                                 double scale = 0.3) {
    auto p = diffassim::init_denoiser(arch, unit_norm(arch.levels), seed);
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (float& t : p.theta) t = static_cast<float>(u(rng));
    return p;
}

inline diffassim::DenoiserArch tiny_arch(int levels = 2) {
    diffassim::DenoiserArch a;
    a.levels = levels;
    a.hidden = 6;
    a.kernel = 3;
    a.blocks = 2;
    a.embed_dim = 4;
    return a;
}

}  // namespace testing
