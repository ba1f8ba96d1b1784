#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qotl/linalg.hpp"
#include "qotl/rng.hpp"

using namespace qotl;

namespace {

Mat basis_proj(int d, int k) {
    Mat p = Mat::zero(d, d);
    p(k, k) = 1.0;
    return p;
}

Mat bell_state() {
    Mat v = Mat::zero(4, 1);
    v(0, 0) = v(3, 0) = 1.0 / std::sqrt(2.0);
    return v * dagger(v);
}

int proj_rank(const Mat& p) { return static_cast<int>(std::round(trace(p).real())); }

}  // namespace

TEST_CASE("kron identities") {
    CHECK(approx_equal(kron(Mat::identity(2), Mat::identity(2)), Mat::identity(4), 1e-14));

    Mat p01 = kron(basis_proj(2, 0), basis_proj(2, 1));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(p01(i, j) - (i == 1 && j == 1 ? cx(1.0) : cx(0.0))) < 1e-15);

    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
        Mat a = rng.ginibre(2, 2), b = rng.ginibre(2, 2);
        Mat c = rng.ginibre(2, 2), d = rng.ginibre(2, 2);
        CHECK(approx_equal(kron(a, b) * kron(c, d), kron(a * c, b * d), 1e-12));
    }
}

TEST_CASE("partial trace marginals") {
    CHECK(approx_equal(partial_trace(bell_state(), 1, 2, 2), 0.5 * Mat::identity(2), 1e-12));

    Rng rng(12);
    Mat r1 = rng.random_density(2), r2 = rng.random_density(3);
    Mat prod = kron(r1, r2);
    CHECK(approx_equal(partial_trace(prod, 2, 2, 3), trace(r1).real() * r2, 1e-12));

    for (int t = 0; t < 10; ++t) {
        Mat a = rng.random_herm(6);
        CHECK(std::abs(trace(partial_trace(a, 1, 2, 3)) - trace(a)) < 1e-12);
        CHECK(is_hermitian(partial_trace(a, 2, 2, 3), 1e-12));
    }
}

TEST_CASE("partial trace is the adjoint of tensoring with I") {
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        Mat a = rng.random_herm(2);
        Mat p = rng.random_psd(6);
        cx lhs = trace_prod(kron(a, Mat::identity(3)), p);
        cx rhs = trace_prod(a, partial_trace(p, 1, 2, 3));
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("herm_eig diagonal case") {
    Mat a = Mat::zero(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 1.0;
    EigResult e = herm_eig(a);
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("herm_eig of SWAP splits into symmetric and antisymmetric parts") {
    Mat s = swap_operator(2);
    EigResult e = herm_eig(s);
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    CHECK(e.values[2] == doctest::Approx(1.0));
    CHECK(e.values[3] == doctest::Approx(-1.0));
    Mat rec = Mat::zero(4, 4);
    for (int k = 0; k < 4; ++k) {
        Mat v(4, 1);
        for (int i = 0; i < 4; ++i) v(i, 0) = e.vectors(i, k);
        rec += e.values[k] * (v * dagger(v));
    }
    CHECK(approx_equal(rec, s, 1e-9));
}

TEST_CASE("herm_eig reconstruction and orthonormality on random input") {
    Rng rng(14);
    for (int t = 0; t < 20; ++t) {
        int d = rng.uniform_int(2, 8);
        Mat a = rng.random_herm(d);
        EigResult e = herm_eig(a);
        CHECK(approx_equal(dagger(e.vectors) * e.vectors, Mat::identity(d), 1e-8));
        Mat lam = Mat::zero(d, d);
        for (int i = 0; i < d; ++i) lam(i, i) = e.values[i];
        CHECK(max_abs(e.vectors * lam * dagger(e.vectors) - a) <= 1e-8 * (1.0 + max_abs(a)));
        for (int i = 0; i + 1 < d; ++i) CHECK(e.values[i] >= e.values[i + 1]);

        Mat p = rng.random_psd(d);
        CHECK(lambda_min(p) >= -1e-9 * (1.0 + lambda_max(p)));
    }
}

TEST_CASE("loewner order basics") {
    CHECK(loewner_leq(Mat::zero(2, 2), Mat::identity(2)));
    CHECK_FALSE(loewner_leq(Mat::identity(2), 0.5 * Mat::identity(2)));

    Rng rng(15);
    for (int t = 0; t < 10; ++t) {
        Mat a = rng.random_herm(4);
        Mat v = rng.random_pure(4);
        CHECK(loewner_leq(a, a + v * dagger(v)));
        CHECK(loewner_leq(a, a));
    }
}

TEST_CASE("loewner order is a partial order up to tolerance") {
    Rng rng(16);
    for (int t = 0; t < 10; ++t) {
        Mat a = rng.random_herm(3);
        Mat p = rng.random_psd(3, 0.5);
        Mat q = rng.random_psd(3, 0.5);
        Mat b = a + p, c = b + q;
        CHECK(loewner_leq(a, b));
        CHECK(loewner_leq(b, c));
        CHECK(loewner_leq(a, c));
        // antisymmetry: a <= b and b <= a forces near-equality
        Mat eps = 1e-10 * Mat::identity(3);
        CHECK(loewner_leq(a, a + eps));
        CHECK(loewner_leq(a + eps, a, 1e-9));
    }
}

TEST_CASE("support projector basics") {
    Mat p0 = basis_proj(2, 0);
    CHECK(approx_equal(support_projector(p0), p0, 1e-9));
    CHECK(approx_equal(support_projector(Mat::zero(3, 3)), Mat::zero(3, 3), 1e-12));
    CHECK_THROWS_AS(support_projector(-1.0 * Mat::identity(2)), std::invalid_argument);
}

TEST_CASE("support of a sum is the join of supports") {
    Rng rng(17);
    for (int t = 0; t < 10; ++t) {
        int d = 4;
        Mat p = rng.random_projector(d, rng.uniform_int(0, d));
        Mat q = rng.random_projector(d, rng.uniform_int(0, d));
        Mat ps = rng.u01() * p, qs = rng.u01() * q;  // scaled PSD with known support
        Mat lhs = support_projector(ps + qs);
        Subspace sj = sub_join(Subspace::from_projector(support_projector(ps)),
                               Subspace::from_projector(support_projector(qs)));
        CHECK(approx_equal(lhs, sj.proj, 1e-7));
    }
}

TEST_CASE("support threshold is scale invariant") {
    Rng rng(18);
    for (int t = 0; t < 10; ++t) {
        Mat a = rng.random_psd(5);
        Mat s1 = support_projector(a);
        Mat s2 = support_projector(1e3 * a);
        CHECK(approx_equal(s1, s2, 1e-9));
    }
}

TEST_CASE("subspace lattice operations") {
    Subspace x = Subspace::from_projector(basis_proj(2, 0));
    CHECK(approx_equal(sub_join(x, sub_complement(x)).proj, Mat::identity(2), 1e-9));

    Subspace y = Subspace::from_projector(basis_proj(2, 1));
    CHECK(max_abs(sub_meet(x, y).proj) < 1e-9);

    Rng rng(19);
    for (int t = 0; t < 10; ++t) {
        Subspace a = Subspace::from_projector(rng.random_projector(4, rng.uniform_int(0, 4)));
        Subspace b = Subspace::from_projector(rng.random_projector(4, rng.uniform_int(0, 4)));
        // De Morgan: (a v b)^perp = a^perp ^ b^perp
        Mat lhs = sub_complement(sub_join(a, b)).proj;
        Mat rhs = sub_meet(sub_complement(a), sub_complement(b)).proj;
        CHECK(approx_equal(lhs, rhs, 1e-7));
    }
}

TEST_CASE("symmetric and antisymmetric projectors") {
    SymProjectors sp = sym_projectors(2);
    CHECK(proj_rank(sp.p_sym) == 3);
    CHECK(proj_rank(sp.p_asym) == 1);
    CHECK(approx_equal(sp.p_sym + sp.p_asym, Mat::identity(4), 1e-12));
    CHECK(max_abs(sp.p_sym * sp.p_asym) < 1e-12);
    CHECK(approx_equal(sp.swap_op * sp.swap_op, Mat::identity(4), 1e-12));
    // SWAP |i,j> = |j,i>
    Mat v = Mat::zero(4, 1);
    v(1, 0) = 1.0;  // |0,1>
    Mat w = sp.swap_op * v;
    CHECK(std::abs(w(2, 0) - cx(1.0)) < 1e-14);
}

TEST_CASE("antisymmetric projector factors across a tensor split") {
    // After reordering (i1 i2, j1 j2) -> (i1 j1, i2 j2), the antisymmetric
    // projector on (H1 (x) H2)^2 becomes asym (x) sym + sym (x) asym.
    SymProjectors s2 = sym_projectors(2);
    SymProjectors s4 = sym_projectors(4);
    Mat r = Mat::zero(16, 16);
    for (int i1 = 0; i1 < 2; ++i1)
        for (int i2 = 0; i2 < 2; ++i2)
            for (int j1 = 0; j1 < 2; ++j1)
                for (int j2 = 0; j2 < 2; ++j2) {
                    int from = (i1 * 2 + i2) * 4 + (j1 * 2 + j2);
                    int to = (i1 * 2 + j1) * 4 + (i2 * 2 + j2);
                    r(to, from) = 1.0;
                }
    Mat lhs = r * s4.p_asym * dagger(r);
    Mat rhs = kron(s2.p_asym, s2.p_sym) + kron(s2.p_sym, s2.p_asym);
    CHECK(approx_equal(lhs, rhs, 1e-12));
}

TEST_CASE("hermitian basis is orthogonal and spans") {
    for (int d : {2, 3}) {
        auto basis = hermitian_basis(d);
        CHECK(static_cast<int>(basis.size()) == d * d);
        for (size_t i = 0; i < basis.size(); ++i) {
            CHECK(is_hermitian(basis[i], 1e-14));
            for (size_t j = i + 1; j < basis.size(); ++j)
                CHECK(std::abs(herm_dot(basis[i], basis[j])) < 1e-14);
        }
    }
}

TEST_CASE("cholesky factor, solve, inverse") {
    Rng rng(20);
    for (int t = 0; t < 10; ++t) {
        int d = rng.uniform_int(2, 6);
        Mat a = rng.random_psd(d) + 0.1 * Mat::identity(d);
        Mat l;
        REQUIRE(chol_lower(a, l));
        CHECK(approx_equal(l * dagger(l), a, 1e-10));
        Mat b = rng.ginibre(d, 1);
        Mat x = tri_solve_lower(l, b);
        CHECK(approx_equal(l * x, b, 1e-10));
        CHECK(approx_equal(chol_inverse(l) * a, Mat::identity(d), 1e-8));
    }
    Mat bad = Mat::identity(2);
    bad(1, 1) = -1.0;
    Mat l;
    CHECK_FALSE(chol_lower(bad, l));
}

TEST_CASE("positive part and trace norm") {
    Mat a = Mat::zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = -3.0;
    CHECK(trace_norm(a) == doctest::Approx(5.0));
    CHECK(positive_part_trace(a) == doctest::Approx(2.0));
    Mat pos = positive_part(a);
    CHECK(pos(0, 0).real() == doctest::Approx(2.0));
    CHECK(std::abs(pos(1, 1)) < 1e-12);

    Rng rng(21);
    for (int t = 0; t < 10; ++t) {
        Mat h = rng.random_herm(4);
        Mat p = positive_part(h), n = positive_part(-1.0 * h);
        CHECK(approx_equal(p - n, h, 1e-10));
        CHECK(lambda_min(p) >= -1e-10);
        CHECK(trace_norm(h) == doctest::Approx(trace(p + n).real()).epsilon(1e-9));
    }
}

TEST_CASE("validated wrappers enforce their invariants") {
    CHECK_THROWS_AS(HermitianOperator::make(Rng(22).ginibre(3, 3)), std::invalid_argument);
    Mat neg = Mat::identity(2);
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(DensityOperator::make(neg), std::invalid_argument);
    CHECK_THROWS_AS(DensityOperator::make(2.0 * Mat::identity(2)), std::invalid_argument);
    DensityOperator full = DensityOperator::make(0.5 * Mat::identity(2));
    CHECK(full.trace_one);
    DensityOperator part = DensityOperator::make(0.25 * Mat::identity(2));
    CHECK_FALSE(part.trace_one);
}
