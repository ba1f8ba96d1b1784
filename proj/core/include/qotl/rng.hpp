#pragma once

#include <cstdint>
#include <random>

#include "qotl/matrix.hpp"

namespace qotl {

// Deterministic sampling built on mt19937_64 with explicit transforms, so the
// generated streams are identical across standard library implementations.
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(uint64_t seed) : eng(seed) {}

    uint64_t next_u64() { return eng(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double u01() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (no cached second value).
    double gauss();

    cx cgauss() { return cx(gauss(), gauss()) * (1.0 / std::sqrt(2.0)); }

    int uniform_int(int lo, int hi);  // inclusive range

    // Independent child stream; `stream` selects the substream.
    Rng fork(uint64_t stream);

    Mat ginibre(int r, int c);
    Mat random_unitary(int d);
    Mat random_pure(int d);  // d x 1, unit norm
    Mat random_density(int d);
    Mat random_psd(int d, double scale = 1.0);
    Mat random_herm(int d, double scale = 1.0);
    Mat random_projector(int d, int rank);
};

}  // namespace qotl
