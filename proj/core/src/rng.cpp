#include "qotl/rng.hpp"

#include <cmath>

#include "qotl/linalg.hpp"

namespace qotl {

double Rng::gauss() {
    // Box-Muller on two fresh uniforms keeps the stream position deterministic.
    double u1 = u01();
    while (u1 <= 0.0) u1 = u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

Rng Rng::fork(uint64_t stream) {
    // splitmix64-style mixing of (state draw, stream index).
    uint64_t z = next_u64() + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
}

Mat Rng::ginibre(int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = cx(gauss(), gauss());
    return m;
}

Mat Rng::random_unitary(int d) {
    // QR of a Ginibre matrix by Gram-Schmidt, with the R diagonal phases fixed
    // so the distribution is Haar.
    Mat g = ginibre(d, d);
    Mat q(d, d);
    for (int j = 0; j < d; ++j) {
        std::vector<cx> col(d);
        for (int i = 0; i < d; ++i) col[i] = g(i, j);
        for (int k = 0; k < j; ++k) {
            cx ip = 0.0;
            for (int i = 0; i < d; ++i) ip += std::conj(q(i, k)) * col[i];
            for (int i = 0; i < d; ++i) col[i] -= ip * q(i, k);
        }
        double nrm = 0.0;
        for (int i = 0; i < d; ++i) nrm += std::norm(col[i]);
        nrm = std::sqrt(nrm);
        // Phase fix: make the leading nonzero entry's original projection real.
        cx ip_orig = 0.0;
        for (int i = 0; i < d; ++i) ip_orig += std::conj(col[i] / nrm) * g(i, j);
        cx phase = ip_orig / std::abs(ip_orig);
        for (int i = 0; i < d; ++i) q(i, j) = col[i] / nrm * phase;
    }
    return q;
}

Mat Rng::random_pure(int d) {
    Mat v(d, 1);
    double nrm = 0.0;
    for (int i = 0; i < d; ++i) {
        v(i, 0) = cx(gauss(), gauss());
        nrm += std::norm(v(i, 0));
    }
    nrm = std::sqrt(nrm);
    for (int i = 0; i < d; ++i) v(i, 0) = v(i, 0) / nrm;
    return v;
}

Mat Rng::random_density(int d) {
    Mat g = ginibre(d, d);
    Mat m = g * dagger(g);
    const double tr = trace(m).real();
    return (1.0 / tr) * m;
}

Mat Rng::random_psd(int d, double scale) {
    Mat g = ginibre(d, d);
    return (scale / d) * (g * dagger(g));
}

Mat Rng::random_herm(int d, double scale) {
    Mat g = ginibre(d, d);
    return scale * herm_part(g);
}

Mat Rng::random_projector(int d, int rank) {
    Mat u = random_unitary(d);
    Mat p = Mat::zero(d, d);
    for (int k = 0; k < rank; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) p(i, j) += u(i, k) * std::conj(u(j, k));
    return p;
}

}  // namespace qotl
