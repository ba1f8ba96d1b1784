#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "qotl/linalg.hpp"
#include "qotl/rng.hpp"
#include "qotl/sdp.hpp"

using namespace qotl;

namespace {

SdpConstraint trace_constraint(int d, double rhs) {
    SdpConstraint c;
    c.coeff = {Mat::identity(d)};
    c.rhs = rhs;
    return c;
}

// Instance with a known optimum, built backwards from a KKT point: pick
// y and PSD Z, set C = sum y_k A_k + Z, pick X PSD with X Z = 0, rhs = A(X).
// Strong duality holds by construction and the optimal value is tr(C X).
struct KnownInstance {
    SdpProblem p;
    double opt = 0.0;
};

KnownInstance random_known(Rng& rng, int d, int m) {
    KnownInstance ki;
    ki.p.block_dims = {d};
    int r = rng.uniform_int(1, d - 1);  // rank of X; Z lives on the complement
    Mat u = rng.random_unitary(d);
    Mat x = Mat::zero(d, d), z = Mat::zero(d, d);
    for (int i = 0; i < d; ++i) {
        Mat v(d, 1);
        for (int k = 0; k < d; ++k) v(k, 0) = u(k, i);
        if (i < r)
            x += (0.2 + rng.u01()) * (v * dagger(v));
        else
            z += (0.2 + rng.u01()) * (v * dagger(v));
    }
    Mat c = z;
    for (int k = 0; k < m; ++k) {
        Mat a = rng.random_herm(d);
        double yk = 2.0 * rng.u01() - 1.0;
        c += yk * a;
        SdpConstraint sc;
        sc.coeff = {a};
        sc.rhs = trace_prod(a, x).real();
        ki.p.constraints.push_back(sc);
    }
    // Pin the trace so the optimal face is bounded (otherwise the central
    // path can diverge in norm along PSD null directions of the constraints).
    SdpConstraint tc;
    tc.coeff = {Mat::identity(d)};
    tc.rhs = trace(x).real();
    ki.p.constraints.push_back(tc);
    ki.p.objective = {c};
    ki.opt = trace_prod(c, x).real();
    return ki;
}

// Penalized projected-gradient descent: an independent low-accuracy check of
// the optimal value for single-block problems.
double pg_oracle(const SdpProblem& p, int steps) {
    int d = p.block_dims[0];
    Mat x = Mat::identity(d);
    for (double kappa : {1e2, 1e3, 1e4, 1e5}) {
        double lip = 1.0;  // gradient Lipschitz bound of the penalized objective
        for (const auto& con : p.constraints) {
            double f = fro_norm(con.coeff[0]);
            lip += 2.0 * kappa * f * f;
        }
        const double eta = 1.0 / lip;
        for (int it = 0; it < steps; ++it) {
            Mat g = p.objective[0];
            for (const auto& con : p.constraints) {
                double viol = trace_prod(con.coeff[0], x).real() - con.rhs;
                g += (2.0 * kappa * viol) * con.coeff[0];
            }
            x = positive_part(herm_part(x - eta * g));
        }
    }
    return trace_prod(p.objective[0], x).real();
}

bool bitwise_equal(const Mat& a, const Mat& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.a.data(), b.a.data(), a.a.size() * sizeof(cx)) == 0;
}

}  // namespace

TEST_CASE("trace normalization has value 1") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {Mat::identity(2)};
    p.constraints = {trace_constraint(2, 1.0)};
    SdpSolution s = sdp_solve(p);
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.gap <= 1e-7);
}

TEST_CASE("smallest eigenvalue is picked out") {
    Mat c = Mat::zero(2, 2);
    c(0, 0) = 1.0;
    c(1, 1) = 2.0;
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {c};
    p.constraints = {trace_constraint(2, 1.0)};
    SdpSolution s = sdp_solve(p);
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-7));
    Mat e00 = Mat::zero(2, 2);
    e00(0, 0) = 1.0;
    CHECK(approx_equal(s.x[0], e00, 1e-6));
}

TEST_CASE("constructed instances recover their optimum") {
    Rng rng(31);
    for (int t = 0; t < 25; ++t) {
        int d = rng.uniform_int(2, 6);
        int m = rng.uniform_int(1, d);
        KnownInstance ki = random_known(rng, d, m);
        SdpSolution s = sdp_solve(ki.p);
        REQUIRE(s.status == SdpStatus::optimal);
        CHECK(std::abs(s.primal_value - ki.opt) <= 1e-6 * (1.0 + std::abs(ki.opt)));
        CHECK(std::abs(s.primal_value - s.dual_value) <= 1e-6 * (1.0 + std::abs(s.primal_value)));
        CHECK(s.dual_value <= s.primal_value + 1e-9);
        // complementarity of the returned pair
        for (size_t b = 0; b < s.x.size(); ++b)
            CHECK(std::abs(trace_prod(s.x[b], s.z[b])) <= 10.0 * 1e-8 * (1.0 + std::abs(s.primal_value)));
        // primal feasibility of the returned point
        for (const auto& con : ki.p.constraints)
            CHECK(std::abs(trace_prod(con.coeff[0], s.x[0]).real() - con.rhs) <=
                  1e-6 * (1.0 + std::abs(con.rhs)));
        CHECK(lambda_min(s.x[0]) >= -1e-7);
        CHECK(lambda_min(s.z[0]) >= -1e-7);
    }
}

TEST_CASE("projected gradient agrees on small blocks") {
    Rng rng(32);
    for (int t = 0; t < 5; ++t) {
        KnownInstance ki = random_known(rng, 2, 1);
        SdpSolution s = sdp_solve(ki.p);
        REQUIRE(s.status == SdpStatus::optimal);
        double pg = pg_oracle(ki.p, 20000);
        CHECK(std::abs(pg - s.primal_value) <= 5e-2 * (1.0 + std::abs(s.primal_value)));
    }
}

TEST_CASE("multi-block problems") {
    // min tr(X1) + tr(diag(1,2,3) X2) with tr(X1)=2 and tr(X2)=1: value 3.
    SdpProblem p;
    p.block_dims = {2, 3};
    Mat c2 = Mat::zero(3, 3);
    c2(0, 0) = 1.0;
    c2(1, 1) = 2.0;
    c2(2, 2) = 3.0;
    p.objective = {Mat::identity(2), c2};
    SdpConstraint k1;
    k1.coeff = {Mat::identity(2), Mat::zero(3, 3)};
    k1.rhs = 2.0;
    SdpConstraint k2;
    k2.coeff = {Mat::zero(2, 2), Mat::identity(3)};
    k2.rhs = 1.0;
    p.constraints = {k1, k2};
    SdpSolution s = sdp_solve(p);
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.primal_value == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("solves are deterministic") {
    Rng rng(33);
    KnownInstance ki = random_known(rng, 4, 3);
    SdpSolution s1 = sdp_solve(ki.p);
    SdpSolution s2 = sdp_solve(ki.p);
    CHECK(s1.status == s2.status);
    CHECK(s1.iterations == s2.iterations);
    CHECK(std::memcmp(&s1.primal_value, &s2.primal_value, sizeof(double)) == 0);
    CHECK(std::memcmp(&s1.dual_value, &s2.dual_value, sizeof(double)) == 0);
    REQUIRE(s1.x.size() == s2.x.size());
    for (size_t b = 0; b < s1.x.size(); ++b) {
        CHECK(bitwise_equal(s1.x[b], s2.x[b]));
        CHECK(bitwise_equal(s1.z[b], s2.z[b]));
    }
}

TEST_CASE("infeasible problems produce a verified ray") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {Mat::identity(2)};
    p.constraints = {trace_constraint(2, 1.0), trace_constraint(2, 2.0)};
    SdpSolution s = sdp_solve(p);
    REQUIRE(s.status == SdpStatus::infeasible);
    REQUIRE(s.infeasible_ray.size() == p.constraints.size());
    Mat acc = Mat::zero(2, 2);
    double ry = 0.0;
    for (size_t k = 0; k < p.constraints.size(); ++k) {
        acc += s.infeasible_ray[k] * p.constraints[k].coeff[0];
        ry += s.infeasible_ray[k] * p.constraints[k].rhs;
    }
    CHECK(lambda_max(acc) <= 1e-7 * (1.0 + max_abs(acc)));
    CHECK(ry > 0.0);
}

TEST_CASE("unbounded problems are flagged") {
    Mat c = Mat::zero(2, 2);
    c(1, 1) = -1.0;
    Mat a = Mat::zero(2, 2);
    a(0, 0) = 1.0;
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {c};
    SdpConstraint k;
    k.coeff = {a};
    k.rhs = 1.0;
    p.constraints = {k};
    SdpSolution s = sdp_solve(p);
    CHECK(s.status == SdpStatus::unbounded);
}

TEST_CASE("presolve drops duplicated rows") {
    // Many copies of the same constraint must not disturb the solve.
    SdpProblem p;
    p.block_dims = {2};
    Mat c = Mat::zero(2, 2);
    c(0, 0) = 1.0;
    c(1, 1) = 2.0;
    p.objective = {c};
    for (int k = 0; k < 18; ++k) {
        SdpConstraint sc = trace_constraint(2, 1.0);
        sc.coeff[0] = (1.0 + 0.5 * k) * sc.coeff[0];
        sc.rhs = 1.0 + 0.5 * k;
        p.constraints.push_back(sc);
    }
    SdpSolution s = sdp_solve(p);
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.y.size() == p.constraints.size());
}

TEST_CASE("presolve reports inconsistent parallel rows as infeasible") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {Mat::identity(2)};
    SdpConstraint a = trace_constraint(2, 1.0);
    SdpConstraint b = trace_constraint(2, 1.0);
    b.coeff[0] = 2.0 * b.coeff[0];
    b.rhs = 3.0;  // 2 tr X = 3 contradicts tr X = 1
    p.constraints = {a, b};
    SdpSolution s = sdp_solve(p);
    CHECK(s.status == SdpStatus::infeasible);
}

TEST_CASE("weak duality holds across random runs") {
    Rng rng(34);
    for (int t = 0; t < 20; ++t) {
        int d = rng.uniform_int(2, 5);
        SdpProblem p;
        p.block_dims = {d};
        p.objective = {rng.random_herm(d)};
        int m = rng.uniform_int(1, 3);
        for (int k = 0; k < m; ++k) {
            SdpConstraint sc;
            sc.coeff = {rng.random_herm(d)};
            Mat x0 = rng.random_psd(d);
            sc.rhs = trace_prod(sc.coeff[0], x0).real();
            p.constraints.push_back(sc);
        }
        // keep the feasible set bounded so the instance stays solvable
        p.constraints.push_back(trace_constraint(d, 1.0 + rng.u01()));
        SdpSolution s = sdp_solve(p);
        if (s.status == SdpStatus::optimal || s.status == SdpStatus::max_iter)
            CHECK(s.dual_value <= s.primal_value + 1e-9 * (1.0 + std::abs(s.primal_value)));
    }
}

TEST_CASE("malformed input is rejected") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {Rng(35).ginibre(2, 2)};  // not Hermitian
    p.constraints = {trace_constraint(2, 1.0)};
    CHECK_THROWS_AS(sdp_solve(p), std::invalid_argument);

    SdpProblem q;
    q.block_dims = {};
    q.objective = {};
    CHECK_THROWS_AS(sdp_solve(q), std::invalid_argument);

    SdpProblem r;
    r.block_dims = {2};
    r.objective = {Mat::identity(3)};  // shape mismatch
    r.constraints = {trace_constraint(2, 1.0)};
    CHECK_THROWS_AS(sdp_solve(r), std::invalid_argument);
}

TEST_CASE("problem dump is stable and parseable") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective = {Mat::identity(2)};
    p.constraints = {trace_constraint(2, 1.0)};
    std::string d1 = sdp_dump(p);
    std::string d2 = sdp_dump(p);
    CHECK(d1 == d2);
    CHECK(d1.find("2") != std::string::npos);
}
