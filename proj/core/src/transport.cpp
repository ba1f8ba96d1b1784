#include "qotl/transport.hpp"

#include <cmath>
#include <stdexcept>

namespace qotl {

namespace {

// tr(h_k t) over hermitian_basis recovers the coordinates
// (t_ii, 2 Re t_ij, -2 Im t_ij) of a Hermitian t.
std::vector<double> herm_coords(const std::vector<Mat>& basis, const Mat& t) {
    std::vector<double> out;
    out.reserve(basis.size());
    for (const auto& h : basis) out.push_back(trace_prod(h, t).real());
    return out;
}

Mat herm_assemble(const std::vector<Mat>& basis, const std::vector<double>& y, size_t offset) {
    Mat out = Mat::zero(basis[0].rows, basis[0].cols);
    for (size_t k = 0; k < basis.size(); ++k) out += y[offset + k] * basis[k];
    return herm_part(out);
}

// Raises eigenvalues in (-1e-10, 0) to zero; solver noise only, larger
// negative parts are left for the feasibility checks to see.
Mat clip_psd(const Mat& m) {
    auto e = herm_eig(m);
    const int d = m.rows;
    Mat out = Mat::zero(d, d);
    for (size_t j = 0; j < e.values.size(); ++j) {
        double lam = e.values[j];
        if (lam <= 0.0 && lam > -1e-10) lam = 0.0;
        if (lam == 0.0) continue;
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k)
                out(i, k) += lam * e.vectors(i, static_cast<int>(j)) *
                             std::conj(e.vectors(k, static_cast<int>(j)));
    }
    return out;
}

// Isometry onto supp(rho): columns are the eigenvectors with eigenvalue above
// 1e-12 * (1 + lambda_max). Returns the identity for full-rank inputs so the
// unreduced problem is left untouched.
int support_isometry(const Mat& rho, Mat& v) {
    auto e = herm_eig(herm_part(rho));
    const int d = rho.rows;
    const double thr = 1e-12 * (1.0 + (e.values.empty() ? 0.0 : std::abs(e.values[0])));
    int r = 0;
    while (r < d && e.values[r] > thr) ++r;
    if (r == d) {
        v = Mat::identity(d);
        return d;
    }
    v = Mat(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) v(i, j) = e.vectors(i, j);
    return r;
}

// When the coupling SDP has no interior (rank-deficient marginals or tight
// traces) the dual optimum need not be attained, so reduced-solve duals can
// fail to lift. This solves the dual side directly on the full space with a
// norm cap beta, which restores attainment at an O(1/beta) value sacrifice,
// then repairs solver noise by shifting Y2 until the Loewner constraint holds.
std::optional<TransportCertificate> complete_certificate(const Mat& cost, const Mat& rho1,
                                                         const Mat& rho2, bool partial,
                                                         double primal_value,
                                                         const SdpOptions& sdp_opts) {
    const int d1 = rho1.rows, d2 = rho2.rows;
    const int d = d1 * d2;
    const double beta = 1e4 * (1.0 + max_abs(cost));
    const double tr1 = trace(rho1).real(), tr2 = trace(rho2).real();
    const Mat i1 = Mat::identity(d1), i2 = Mat::identity(d2);

    const auto basis1 = hermitian_basis(d1);
    const auto basis2 = hermitian_basis(d2);
    const auto basis = hermitian_basis(d);

    // Blocks: Y1, Y2, S (= C - Y1 (x) I + I (x) Y2), then the cap and scalar
    // slacks. Exact: U1, U2 cap both operators at beta I. Partial: S1, S2
    // realize lambda_max(Y1) <= y2 and y1 <= lambda_min(Y2) with scalars
    // y1, delta (= y2 - y1), u (= beta - y2), plus the Y2 cap U2.
    SdpProblem prob;
    prob.block_dims = {d1, d2, d};
    int b_u1 = -1, b_u2 = -1, b_s1 = -1, b_s2 = -1, b_y1 = -1, b_dl = -1, b_cap = -1;
    if (!partial) {
        b_u1 = 3;
        b_u2 = 4;
        prob.block_dims.push_back(d1);
        prob.block_dims.push_back(d2);
    } else {
        b_s1 = 3;
        b_s2 = 4;
        b_y1 = 5;
        b_dl = 6;
        b_cap = 7;
        b_u2 = 8;
        prob.block_dims.insert(prob.block_dims.end(), {d1, d2, 1, 1, 1, d2});
    }
    const int nb = static_cast<int>(prob.block_dims.size());
    auto zeros = [&]() {
        std::vector<Mat> v;
        for (int b = 0; b < nb; ++b) v.push_back(Mat::zero(prob.block_dims[b], prob.block_dims[b]));
        return v;
    };

    prob.objective = zeros();
    prob.objective[0] = -1.0 * rho1;
    prob.objective[1] = rho2;
    if (partial) {
        prob.objective[b_y1](0, 0) = tr1 - tr2;
        prob.objective[b_dl](0, 0) = 1.0 - tr2;
    }

    for (const auto& h : basis) {
        SdpConstraint con;
        con.coeff = zeros();
        con.coeff[0] = partial_trace(h, 1, d1, d2);
        con.coeff[1] = -1.0 * partial_trace(h, 2, d1, d2);
        con.coeff[2] = h;
        con.rhs = trace_prod(h, cost).real();
        prob.constraints.push_back(std::move(con));
    }
    if (!partial) {
        for (const auto& h : basis1) {
            SdpConstraint con;
            con.coeff = zeros();
            con.coeff[0] = h;
            con.coeff[b_u1] = h;
            con.rhs = beta * trace(h).real();
            prob.constraints.push_back(std::move(con));
        }
    } else {
        for (const auto& h : basis1) {
            SdpConstraint con;  // (y1 + delta) tr(h) - tr(h Y1) - tr(h S1) = 0
            con.coeff = zeros();
            con.coeff[0] = -1.0 * h;
            con.coeff[b_s1] = -1.0 * h;
            con.coeff[b_y1](0, 0) = trace(h).real();
            con.coeff[b_dl](0, 0) = trace(h).real();
            con.rhs = 0.0;
            prob.constraints.push_back(std::move(con));
        }
        for (const auto& h : basis2) {
            SdpConstraint con;  // tr(h Y2) - y1 tr(h) - tr(h S2) = 0
            con.coeff = zeros();
            con.coeff[1] = h;
            con.coeff[b_s2] = -1.0 * h;
            con.coeff[b_y1](0, 0) = -trace(h).real();
            con.rhs = 0.0;
            prob.constraints.push_back(std::move(con));
        }
        SdpConstraint cap;  // y1 + delta + u = beta
        cap.coeff = zeros();
        cap.coeff[b_y1](0, 0) = 1.0;
        cap.coeff[b_dl](0, 0) = 1.0;
        cap.coeff[b_cap](0, 0) = 1.0;
        cap.rhs = beta;
        prob.constraints.push_back(std::move(cap));
    }
    for (const auto& h : basis2) {
        SdpConstraint con;
        con.coeff = zeros();
        con.coeff[1] = h;
        con.coeff[b_u2] = h;
        con.rhs = beta * trace(h).real();
        prob.constraints.push_back(std::move(con));
    }

    SdpSolution sol;
    try {
        sol = sdp_solve(prob, sdp_opts);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (sol.status != SdpStatus::optimal) return std::nullopt;

    TransportCertificate cert;
    cert.partial = partial;
    cert.big_y1 = clip_psd(sol.x[0]);
    cert.big_y2 = clip_psd(sol.x[1]);
    // Absorb the residual of the Loewner constraint into Y2.
    const double nu = lambda_min(herm_part(cost - kron(cert.big_y1, i2) + kron(i1, cert.big_y2)));
    if (nu < 0.0) cert.big_y2 += (-nu) * i2;
    if (partial) {
        const double y1_raw = sol.x[b_y1](0, 0).real();
        const double y2_raw = y1_raw + sol.x[b_dl](0, 0).real();
        cert.y1 = std::max(0.0, std::min(y1_raw, lambda_min(cert.big_y2)));
        cert.y2 = std::max({y2_raw, lambda_max(cert.big_y1), cert.y1});
    }

    if (!certificate_feasible(cert, cost, 1e-7)) return std::nullopt;
    const double v = certificate_value(cert, rho1, rho2);
    if (v > primal_value + 1e-6 * (1.0 + std::abs(primal_value))) return std::nullopt;
    return cert;
}

}  // namespace

double certificate_value(const TransportCertificate& c, const Mat& rho1, const Mat& rho2) {
    const double t1 = trace_prod(c.big_y1, rho1).real();
    const double t2 = trace_prod(c.big_y2, rho2).real();
    if (!c.partial) return t1 - t2;
    const double tr1 = trace(rho1).real(), tr2 = trace(rho2).real();
    return c.y1 * (1.0 - tr1) + t1 - c.y2 * (1.0 - tr2) - t2;
}

bool certificate_feasible(const TransportCertificate& c, const Mat& cost, double tol) {
    const int d1 = c.big_y1.rows, d2 = c.big_y2.rows;
    if (d1 * d2 != cost.rows) throw std::invalid_argument("certificate_feasible: dims");
    const double s1 = 1.0 + max_abs(c.big_y1), s2 = 1.0 + max_abs(c.big_y2);
    if (lambda_min(c.big_y1) < -tol * s1) return false;
    if (lambda_min(c.big_y2) < -tol * s2) return false;
    Mat lhs = kron(c.big_y1, Mat::identity(d2)) - kron(Mat::identity(d1), c.big_y2);
    if (!loewner_leq(lhs, cost, tol)) return false;
    if (c.partial) {
        if (c.y1 < -tol || c.y2 - c.y1 < -tol) return false;
        if (lambda_max(c.big_y1) > c.y2 + tol * (1.0 + std::abs(c.y2))) return false;
        if (lambda_min(c.big_y2) < c.y1 - tol * (1.0 + std::abs(c.y1))) return false;
    }
    return true;
}

bool is_coupling(const Mat& rho, const Mat& rho1, const Mat& rho2, double tol) {
    const int d1 = rho1.rows, d2 = rho2.rows;
    if (!rho.is_square() || !rho1.is_square() || !rho2.is_square() || rho.rows != d1 * d2)
        throw std::invalid_argument("is_coupling: dimension mismatch");
    return max_abs(partial_trace(rho, 1, d1, d2) - rho1) <= tol &&
           max_abs(partial_trace(rho, 2, d1, d2) - rho2) <= tol;
}

bool is_partial_coupling(const Mat& rho, const Mat& rho1, const Mat& rho2, double tol) {
    const int d1 = rho1.rows, d2 = rho2.rows;
    if (!rho.is_square() || !rho1.is_square() || !rho2.is_square() || rho.rows != d1 * d2)
        throw std::invalid_argument("is_partial_coupling: dimension mismatch");
    if (!loewner_leq(partial_trace(rho, 1, d1, d2), rho1, tol)) return false;
    if (!loewner_leq(partial_trace(rho, 2, d1, d2), rho2, tol)) return false;
    const double tr1 = trace(rho1).real(), tr2 = trace(rho2).real();
    return tr1 + tr2 <= 1.0 + trace(rho).real() + tol;
}

TransportResult transport_value(const IVPredicate& cost, const DensityOperator& rho1,
                                const DensityOperator& rho2, TransportMode mode,
                                const TransportOptions& opts) {
    const int d1 = rho1.dim, d2 = rho2.dim;
    const int d = d1 * d2;
    if (cost.dim != d) throw std::invalid_argument("transport_value: cost dimension mismatch");
    const double tr1 = trace(rho1.m).real(), tr2 = trace(rho2.m).real();
    const bool partial = mode == TransportMode::partial;
    if (!partial && std::abs(tr1 - tr2) > 1e-9)
        throw std::invalid_argument(
            "transport_value: no coupling exists, marginal traces differ by " +
            std::to_string(std::abs(tr1 - tr2)));

    TransportResult res;

    // Both marginals numerically zero: the zero coupling is optimal.
    if (tr1 <= 1e-12 && tr2 <= 1e-12) {
        res.value = ExtReal::finite(0.0);
        res.witness = Mat::zero(d, d);
        res.solver_status = SdpStatus::optimal;
        TransportCertificate cert;
        cert.partial = partial;
        cert.big_y1 = Mat::zero(d1, d1);
        cert.big_y2 = Mat::zero(d2, d2);
        res.dual_certificate = std::move(cert);
        res.message = "zero marginals; zero coupling is optimal";
        return res;
    }

    // Marginal support reduction: the dominations tr_2(rho) <= rho1 and
    // tr_1(rho) <= rho2 force supp(rho) into supp(rho1) (x) supp(rho2).
    // Restricting there makes the reduced marginals full-rank, so the solve
    // keeps a strictly feasible interior even for pure inputs.
    Mat V1, V2;
    const int r1 = support_isometry(rho1.m, V1);
    const int r2 = support_isometry(rho2.m, V2);
    const bool reduced = r1 < d1 || r2 < d2;

    // Trace-forced equalities in partial mode: when one marginal has unit
    // trace the other side's domination is tight, so its slack block would be
    // pinned at zero; solving with the equality keeps the interior nonempty.
    const bool eq1 = !partial || tr2 >= 1.0 - 1e-9;
    const bool eq2 = !partial || tr1 >= 1.0 - 1e-9;
    const bool tight = partial && (eq1 || eq2);

    // Infinite cost directions: restrict the coupling to the complement of
    // X_C inside the support-reduced space. A PSD matrix vanishing under the
    // projected compression is exactly M eta M^dag over the combined isometry
    // M, which keeps the barrier well-centered compared to adding singular
    // equality constraints.
    const bool has_inf = max_abs(cost.inf_proj) > 0.5;
    Mat M;  // d x r isometry; empty when no reduction applies
    int r = reduced ? r1 * r2 : d;
    if (reduced) M = kron(V1, V2);
    if (has_inf) {
        const Mat pi = reduced ? herm_part(dagger(M) * cost.inf_proj * M) : cost.inf_proj;
        // Allowed directions overlap the forbidden subspace by at most 1e-9.
        auto e = herm_eig(pi);
        int skip = 0;
        while (skip < r && e.values[skip] > 1e-9) ++skip;
        Mat U(r, r - skip);
        for (int i = 0; i < r; ++i)
            for (int j = skip; j < r; ++j) U(i, j - skip) = e.vectors(i, j);
        M = reduced ? M * U : U;
        r -= skip;
    }

    if (r == 0) {
        // Only the zero coupling remains.
        const bool feasible = partial ? (tr1 + tr2 <= 1.0 + 1e-9)
                                      : (trace_norm(rho1.m) <= 1e-9 && trace_norm(rho2.m) <= 1e-9);
        if (feasible) {
            res.value = ExtReal::finite(0.0);
            res.witness = Mat::zero(d, d);
            res.solver_status = SdpStatus::optimal;
            res.message = "forbidden subspace spans everything; zero coupling is optimal";
        } else {
            res.value = ExtReal::infinity();
            res.solver_status = SdpStatus::infeasible;
            res.message = "forbidden subspace spans everything; no coupling remains";
        }
        return res;
    }

    const bool compress = reduced || has_inf;
    auto compressed = [&](const Mat& m) { return compress ? dagger(M) * m * M : m; };
    auto compress1 = [&](const Mat& h) { return r1 < d1 ? herm_part(dagger(V1) * h * V1) : h; };
    auto compress2 = [&](const Mat& h) { return r2 < d2 ? herm_part(dagger(V2) * h * V2) : h; };

    const auto basis1 = hermitian_basis(d1);
    const auto basis2 = hermitian_basis(d2);
    const auto rhs1 = herm_coords(basis1, rho1.m);
    const auto rhs2 = herm_coords(basis2, rho2.m);

    SdpProblem prob;
    prob.block_dims = {r};
    int bs1 = -1, bs2 = -1, bt = -1;  // slack blocks; -1 when trace-forced away
    if (partial && !eq1) {
        bs1 = static_cast<int>(prob.block_dims.size());
        prob.block_dims.push_back(r1);
    }
    if (partial && !eq2) {
        bs2 = static_cast<int>(prob.block_dims.size());
        prob.block_dims.push_back(r2);
    }
    if (partial && !eq1 && !eq2) {
        bt = static_cast<int>(prob.block_dims.size());
        prob.block_dims.push_back(1);
    }
    const int nblocks = static_cast<int>(prob.block_dims.size());
    auto zero_blocks = [&]() {
        std::vector<Mat> v;
        for (int b = 0; b < nblocks; ++b)
            v.push_back(Mat::zero(prob.block_dims[b], prob.block_dims[b]));
        return v;
    };

    prob.objective = zero_blocks();
    prob.objective[0] = herm_part(compressed(cost.finite));

    const Mat i1 = Mat::identity(d1), i2 = Mat::identity(d2);
    for (size_t k = 0; k < basis1.size(); ++k) {
        SdpConstraint con;
        con.coeff = zero_blocks();
        con.coeff[0] = compressed(kron(basis1[k], i2));
        if (bs1 >= 0) con.coeff[bs1] = compress1(basis1[k]);
        con.rhs = rhs1[k];
        prob.constraints.push_back(std::move(con));
    }
    for (size_t k = 0; k < basis2.size(); ++k) {
        SdpConstraint con;
        con.coeff = zero_blocks();
        con.coeff[0] = compressed(kron(i1, basis2[k]));
        if (bs2 >= 0) con.coeff[bs2] = compress2(basis2[k]);
        con.rhs = rhs2[k];
        prob.constraints.push_back(std::move(con));
    }
    if (bt >= 0) {
        SdpConstraint con;
        con.coeff = zero_blocks();
        con.coeff[0] = Mat::identity(r);
        con.coeff[bt] = -1.0 * Mat::identity(1);
        con.rhs = tr1 + tr2 - 1.0;
        prob.constraints.push_back(std::move(con));
    }

    SdpSolution sol = sdp_solve(prob, opts.sdp);
    res.solver_status = sol.status;
    res.message = sol.message;
    res.gap = sol.gap;

    if (sol.status == SdpStatus::optimal) {
        res.value = ExtReal::finite(sol.primal_value);
        res.witness = herm_part(compress ? M * sol.x[0] * dagger(M) : sol.x[0]);
        if (!has_inf) {
            TransportCertificate cert;
            cert.partial = partial;
            Mat y1p = herm_assemble(basis1, sol.y, 0);
            Mat y2p = herm_assemble(basis2, sol.y, basis1.size());
            if (!partial) {
                const double c =
                    std::max({0.0, -lambda_min(y1p), lambda_max(y2p)});
                cert.big_y1 = clip_psd(y1p + c * i1);
                cert.big_y2 = clip_psd(c * i2 - y2p);
            } else if (bt >= 0) {
                const double tau = std::max(0.0, sol.y[basis1.size() + basis2.size()]);
                Mat y1 = y1p + tau * i1;   // <= tau I since the slack dual forces y1p <= 0
                Mat y2 = -1.0 * y2p;       // >= 0 likewise
                const double c = std::max(0.0, -lambda_min(y1));
                cert.y1 = c;
                cert.y2 = tau + c;
                cert.big_y1 = clip_psd(y1 + c * i1);
                cert.big_y2 = clip_psd(y2 + c * i2);
            } else {
                // Trace-forced marginal equalities: the quadruple scalars only
                // enter the certificate value through the (1 - tr) defects, so
                // they are pinned by feasibility alone.
                const double c = std::max({0.0, -lambda_min(y1p), lambda_max(y2p)});
                cert.big_y1 = clip_psd(y1p + c * i1);
                cert.big_y2 = clip_psd(c * i2 - y2p);
                cert.y1 = (eq1 && !eq2) ? c : 0.0;
                cert.y2 = std::max({c, cert.y1, lambda_max(cert.big_y1)});
            }
            // Duals of a reduced or trace-tightened solve certify the reduced
            // problem; attach the lift only if it verifies on the full space.
            const bool gate = reduced || tight;
            const bool keep =
                !gate ||
                (certificate_feasible(cert, cost.finite, 1e-7) &&
                 std::abs(certificate_value(cert, rho1.m, rho2.m) - sol.primal_value) <=
                     1e-6 * (1.0 + std::abs(sol.primal_value)));
            if (keep) {
                res.dual_certificate = std::move(cert);
            } else if (opts.complete_dual) {
                auto done = complete_certificate(cost.finite, rho1.m, rho2.m, partial,
                                                 sol.primal_value, opts.sdp);
                if (done) {
                    res.dual_certificate = std::move(done);
                    res.message = "dual certificate recovered by a capped completion solve";
                } else {
                    res.message = "dual certificate did not lift from the reduced problem";
                }
            } else {
                res.message = "dual certificate did not lift from the reduced problem";
            }
        }
        return res;
    }

    if (sol.status == SdpStatus::infeasible && has_inf) {
        res.value = ExtReal::infinity();
        res.message = "no coupling avoids the forbidden subspace: " + sol.message;
        return res;
    }

    if (has_inf) {
        // The reduced solve did not settle; decide emptiness by minimizing the
        // forbidden-subspace overlap over the unrestricted coupling set.
        TransportResult probe = transport_value(ivp_from_matrix(cost.inf_proj), rho1, rho2,
                                                mode, opts);
        if (!probe.value.is_inf() && probe.value.value() > 1e-6) {
            res.value = ExtReal::infinity();
            res.message = "every coupling overlaps the forbidden subspace (overlap " +
                          std::to_string(probe.value.value()) + ")";
            return res;
        }
    }
    throw std::runtime_error(std::string("transport_value: solver failed (") +
                             sdp_status_name(sol.status) + "): " + sol.message);
}

namespace {

LiftingResult lifting_decision(const DensityOperator& rho1, const DensityOperator& rho2,
                               const HermitianOperator& cost, ExtReal eps, TransportMode mode,
                               const TransportOptions& opts) {
    TransportOptions wopts = opts;  // deciders surface certificates
    wopts.complete_dual = true;
    TransportResult t = transport_value(ivp_from_matrix(cost.m), rho1, rho2, mode, wopts);
    LiftingResult out;
    out.value = t.value;
    out.gap = t.gap;
    out.holds = ext_leq(t.value, eps, 1e-7);
    if (out.holds) {
        out.witness = t.witness;
    } else {
        out.certificate = t.dual_certificate;
    }
    return out;
}

}  // namespace

LiftingResult lifting_check(const DensityOperator& rho1, const HermitianOperator& cost,
                            ExtReal eps, const DensityOperator& rho2,
                            const TransportOptions& opts) {
    const double tr1 = trace(rho1.m).real(), tr2 = trace(rho2.m).real();
    if (std::abs(tr1 - tr2) > 1e-9)
        throw std::invalid_argument("lifting_check: marginal traces differ");
    return lifting_decision(rho1, rho2, cost, eps, TransportMode::exact, opts);
}

LiftingResult partial_strassen_check(const DensityOperator& rho1, const DensityOperator& rho2,
                                     const HermitianOperator& cost, ExtReal eps,
                                     const TransportOptions& opts) {
    return lifting_decision(rho1, rho2, cost, eps, TransportMode::partial, opts);
}

Mat star_state(const Mat& rho) {
    const int d = rho.rows;
    Mat out = Mat::zero(d + 1, d + 1);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i, j) = rho(i, j);
    out(d, d) = 1.0 - trace(rho).real();
    return out;
}

Mat star_cost(const Mat& a, int d1, int d2) {
    if (a.rows != d1 * d2 || !a.is_square())
        throw std::invalid_argument("star_cost: dimension mismatch");
    const int e2 = d2 + 1;
    Mat out = Mat::zero((d1 + 1) * e2, (d1 + 1) * e2);
    for (int i = 0; i < d1; ++i)
        for (int k = 0; k < d2; ++k)
            for (int j = 0; j < d1; ++j)
                for (int l = 0; l < d2; ++l)
                    out(i * e2 + k, j * e2 + l) = a(i * d2 + k, j * d2 + l);
    return out;
}

Mat star_lift(const Mat& rho, const Mat& rho1, const Mat& rho2) {
    const int d1 = rho1.rows, d2 = rho2.rows;
    if (!is_partial_coupling(rho, rho1, rho2, 1e-7))
        throw std::invalid_argument("star_lift: input is not a partial coupling");
    const int e2 = d2 + 1;
    Mat out = star_cost(rho, d1, d2);
    Mat m1 = rho1 - partial_trace(rho, 1, d1, d2);
    Mat m2 = rho2 - partial_trace(rho, 2, d1, d2);
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d1; ++j) out(i * e2 + d2, j * e2 + d2) += m1(i, j);
    for (int k = 0; k < d2; ++k)
        for (int l = 0; l < d2; ++l) out(d1 * e2 + k, d1 * e2 + l) += m2(k, l);
    out((d1 + 1) * e2 - 1, (d1 + 1) * e2 - 1) +=
        1.0 + trace(rho).real() - trace(rho1).real() - trace(rho2).real();
    return out;
}

TransportResult t_stab(const DensityOperator& rho, const DensityOperator& sigma,
                       const TransportOptions& opts) {
    if (!rho.trace_one || !sigma.trace_one)
        throw std::invalid_argument("t_stab: states must have unit trace");
    if (rho.dim != sigma.dim) throw std::invalid_argument("t_stab: dimension mismatch");
    const Mat half = 0.5 * Mat::identity(2);
    DensityOperator ext1 = DensityOperator::make(kron(rho.m, half));
    DensityOperator ext2 = DensityOperator::make(kron(sigma.m, half));
    const Mat cost = sym_projectors(2 * rho.dim).p_asym;
    return transport_value(ivp_from_matrix(cost), ext1, ext2, TransportMode::exact, opts);
}

Mat uu_twirl(const Mat& x) {
    if (!x.is_square()) throw std::invalid_argument("uu_twirl: not square");
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.rows))));
    if (d * d != x.rows) throw std::invalid_argument("uu_twirl: dimension is not a square");
    auto sp = sym_projectors(d);
    const double rank_s = 0.5 * d * (d + 1), rank_a = 0.5 * d * (d - 1);
    Mat out = (trace_prod(x, sp.p_sym) / rank_s) * sp.p_sym;
    if (rank_a > 0.0) out += (trace_prod(x, sp.p_asym) / rank_a) * sp.p_asym;
    return out;
}

}  // namespace qotl
