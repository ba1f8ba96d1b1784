#include "qotl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <sstream>

#include "qotl/linalg.hpp"

namespace qotl {

const char* sdp_status_name(SdpStatus s) {
    switch (s) {
        case SdpStatus::optimal: return "optimal";
        case SdpStatus::infeasible: return "infeasible";
        case SdpStatus::unbounded: return "unbounded";
        case SdpStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

namespace {

// Real symmetric positive definite solve; returns false if the factorization
// fails even after escalating ridge terms.
struct RealChol {
    int n = 0;
    std::vector<double> l;  // row-major lower factor

    bool factor(const std::vector<double>& m, int n_, double ridge) {
        n = n_;
        l.assign(static_cast<size_t>(n) * n, 0.0);
        for (int j = 0; j < n; ++j) {
            double d = m[static_cast<size_t>(j) * n + j] + ridge;
            for (int k = 0; k < j; ++k) d -= l[static_cast<size_t>(j) * n + k] * l[static_cast<size_t>(j) * n + k];
            if (!(d > 0.0) || !std::isfinite(d)) return false;
            const double ljj = std::sqrt(d);
            l[static_cast<size_t>(j) * n + j] = ljj;
            for (int i = j + 1; i < n; ++i) {
                double s = m[static_cast<size_t>(i) * n + j];
                for (int k = 0; k < j; ++k)
                    s -= l[static_cast<size_t>(i) * n + k] * l[static_cast<size_t>(j) * n + k];
                l[static_cast<size_t>(i) * n + j] = s / ljj;
            }
        }
        return true;
    }

    std::vector<double> solve(std::vector<double> b) const {
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int k = 0; k < i; ++k) s -= l[static_cast<size_t>(i) * n + k] * b[k];
            b[i] = s / l[static_cast<size_t>(i) * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = b[i];
            for (int k = i + 1; k < n; ++k) s -= l[static_cast<size_t>(k) * n + i] * b[k];
            b[i] = s / l[static_cast<size_t>(i) * n + i];
        }
        return b;
    }
};

// Largest alpha >= 0 with s + alpha*ds >= 0, assuming s > 0.
double step_max(const Mat& s, const Mat& ds) {
    Mat l;
    if (!chol_lower(s, l)) return 0.0;
    Mat t = tri_solve_lower(l, ds);
    Mat w = dagger(tri_solve_lower(l, dagger(t)));
    const double lmin = lambda_min(w);
    if (lmin >= -1e-300) return 1e100;
    return -1.0 / lmin;
}

bool all_blocks_pd(const std::vector<Mat>& xs) {
    Mat l;
    for (const auto& x : xs)
        if (!chol_lower(x, l)) return false;
    return true;
}

struct Presolve {
    std::vector<int> kept;
    bool inconsistent = false;
    std::vector<double> farkas;  // certificate when inconsistent
};

// Rank detection on the constraint Gram matrix (pivoted Cholesky, which makes
// the same rank decisions as a rank-revealing QR on the stacked constraint
// rows). Dependent rows must have consistent right-hand sides.
Presolve presolve_constraints(const SdpProblem& p, double pivot_tol) {
    const int m = static_cast<int>(p.constraints.size());
    const int nb = static_cast<int>(p.block_dims.size());
    Presolve out;
    if (m == 0) return out;

    std::vector<double> gram(static_cast<size_t>(m) * m, 0.0);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            double s = 0.0;
            for (int b = 0; b < nb; ++b)
                s += herm_dot(p.constraints[k].coeff[b], p.constraints[l].coeff[b]);
            gram[static_cast<size_t>(k) * m + l] = s;
            gram[static_cast<size_t>(l) * m + k] = s;
        }

    double max_diag = 0.0;
    for (int k = 0; k < m; ++k) max_diag = std::max(max_diag, gram[static_cast<size_t>(k) * m + k]);
    // Floor at ~512 eps: eliminating a numerically dependent row against its
    // pivot leaves a residual diagonal of order eps * max_diag, which must be
    // classified as dependent or the solver sees spurious constraint
    // directions (unbounded dual components, frozen duality gap).
    const double drop_tol =
        std::max(pivot_tol * pivot_tol, 1e-13) * std::max(max_diag, 1e-300);

    // Greedy pivoted elimination on a working copy; rows whose residual norm
    // falls below the pivot threshold are dependent.
    std::vector<double> work = gram;
    std::vector<bool> used(m, false);
    std::vector<int> dropped;
    for (int step = 0; step < m; ++step) {
        int piv = -1;
        double best = drop_tol;
        for (int k = 0; k < m; ++k) {
            if (used[k]) continue;
            const double d = work[static_cast<size_t>(k) * m + k];
            if (d > best) {
                best = d;
                piv = k;
            }
        }
        if (piv < 0) break;
        used[piv] = true;
        out.kept.push_back(piv);
        const double d = work[static_cast<size_t>(piv) * m + piv];
        for (int i = 0; i < m; ++i) {
            if (used[i]) continue;
            const double f = work[static_cast<size_t>(i) * m + piv] / d;
            for (int j = 0; j < m; ++j)
                work[static_cast<size_t>(i) * m + j] -= f * work[static_cast<size_t>(piv) * m + j];
        }
    }
    std::sort(out.kept.begin(), out.kept.end());
    for (int k = 0; k < m; ++k)
        if (!used[k]) dropped.push_back(k);

    if (dropped.empty()) return out;

    // Express each dropped row over the kept rows and check rhs consistency.
    const int mk = static_cast<int>(out.kept.size());
    RealChol chol;
    if (mk > 0) {
        std::vector<double> gkk(static_cast<size_t>(mk) * mk);
        for (int i = 0; i < mk; ++i)
            for (int j = 0; j < mk; ++j)
                gkk[static_cast<size_t>(i) * mk + j] =
                    gram[static_cast<size_t>(out.kept[i]) * m + out.kept[j]];
        if (!chol.factor(gkk, mk, 1e-14 * std::max(max_diag, 1.0))) {
            // Should not happen for a pivoted kept set; treat everything as kept.
            out.kept.resize(m);
            for (int k = 0; k < m; ++k) out.kept[k] = k;
            return out;
        }
    }
    double rhs_scale = 1.0;
    for (const auto& c : p.constraints) rhs_scale = std::max(rhs_scale, std::abs(c.rhs));
    for (int d : dropped) {
        std::vector<double> coeffs;
        double combo_rhs = 0.0;
        if (mk > 0) {
            std::vector<double> gkd(mk);
            for (int i = 0; i < mk; ++i)
                gkd[i] = gram[static_cast<size_t>(out.kept[i]) * m + d];
            coeffs = chol.solve(gkd);
            for (int i = 0; i < mk; ++i) combo_rhs += coeffs[i] * p.constraints[out.kept[i]].rhs;
        }
        if (std::abs(p.constraints[d].rhs - combo_rhs) > 1e-8 * rhs_scale) {
            out.inconsistent = true;
            out.farkas.assign(m, 0.0);
            const double sgn = (p.constraints[d].rhs - combo_rhs) > 0.0 ? 1.0 : -1.0;
            out.farkas[d] = sgn;
            for (int i = 0; i < mk; ++i) out.farkas[out.kept[i]] = -sgn * coeffs[i];
            return out;
        }
    }
    return out;
}

bool farkas_certificate_valid(const SdpProblem& p, std::vector<double>& y) {
    const int m = static_cast<int>(p.constraints.size());
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += y[k] * p.constraints[k].rhs;
    if (!(s > 1e-12)) return false;
    for (int k = 0; k < m; ++k) y[k] /= s;  // normalize so rhs^T y = 1
    for (size_t b = 0; b < p.block_dims.size(); ++b) {
        Mat sum = Mat::zero(p.block_dims[b], p.block_dims[b]);
        for (int k = 0; k < m; ++k) {
            if (y[k] == 0.0) continue;
            sum += y[k] * p.constraints[k].coeff[b];
        }
        if (lambda_max(sum) > 1e-7 * (1.0 + max_abs(sum))) return false;
    }
    return true;
}

}  // namespace

SdpSolution sdp_solve(const SdpProblem& p, const SdpOptions& opts) {
    if (!opts.dump_path.empty()) {
        std::ofstream dump(opts.dump_path, std::ios::app);
        dump << sdp_dump(p) << "%\n";
    }
    const int nb = static_cast<int>(p.block_dims.size());
    if (nb == 0) throw std::invalid_argument("sdp_solve: no blocks");
    for (int b = 0; b < nb; ++b)
        if (p.block_dims[b] <= 0) throw std::invalid_argument("sdp_solve: block dimension must be positive");
    if (static_cast<int>(p.objective.size()) != nb)
        throw std::invalid_argument("sdp_solve: objective block count mismatch");
    for (int b = 0; b < nb; ++b) {
        const Mat& c = p.objective[b];
        if (c.rows != p.block_dims[b] || c.cols != p.block_dims[b])
            throw std::invalid_argument("sdp_solve: objective block shape mismatch");
        if (!is_hermitian(c, tol_scale(1e-9, max_abs(c))))
            throw std::invalid_argument("sdp_solve: objective block not Hermitian");
    }
    const int m_all = static_cast<int>(p.constraints.size());
    for (int k = 0; k < m_all; ++k) {
        if (static_cast<int>(p.constraints[k].coeff.size()) != nb)
            throw std::invalid_argument("sdp_solve: constraint block count mismatch");
        for (int b = 0; b < nb; ++b) {
            const Mat& a = p.constraints[k].coeff[b];
            if (a.rows != p.block_dims[b] || a.cols != p.block_dims[b])
                throw std::invalid_argument("sdp_solve: constraint block shape mismatch");
            if (!is_hermitian(a, tol_scale(1e-9, max_abs(a))))
                throw std::invalid_argument("sdp_solve: constraint block not Hermitian");
        }
        if (!std::isfinite(p.constraints[k].rhs))
            throw std::invalid_argument("sdp_solve: constraint rhs not finite");
    }

    SdpSolution sol;
    sol.y.assign(m_all, 0.0);

    Presolve pre = presolve_constraints(p, 1e-10);
    if (pre.inconsistent) {
        sol.status = SdpStatus::infeasible;
        sol.infeasible_ray = pre.farkas;
        farkas_certificate_valid(p, sol.infeasible_ray);
        sol.message = "inconsistent equality constraints";
        return sol;
    }
    const std::vector<int>& kept = pre.kept;
    const int m = static_cast<int>(kept.size());

    // Symmetrized working copies.
    std::vector<Mat> C(nb);
    for (int b = 0; b < nb; ++b) C[b] = herm_part(p.objective[b]);
    std::vector<std::vector<Mat>> A(m);
    std::vector<double> rhs(m);
    for (int k = 0; k < m; ++k) {
        A[k].resize(nb);
        for (int b = 0; b < nb; ++b) A[k][b] = herm_part(p.constraints[kept[k]].coeff[b]);
        rhs[k] = p.constraints[kept[k]].rhs;
    }

    int total_n = 0;
    for (int b = 0; b < nb; ++b) total_n += p.block_dims[b];
    double c_max = 0.0;
    for (int b = 0; b < nb; ++b) c_max = std::max(c_max, max_abs(C[b]));
    const double mu0 = 1.0 + c_max;
    double rhs_scale = 1.0;
    for (double r : rhs) rhs_scale = std::max(rhs_scale, std::abs(r));

    std::vector<Mat> X(nb), Z(nb);
    for (int b = 0; b < nb; ++b) {
        X[b] = mu0 * Mat::identity(p.block_dims[b]);
        Z[b] = mu0 * Mat::identity(p.block_dims[b]);
    }
    std::vector<double> y(m, 0.0);

    auto finalize = [&](SdpStatus status, const std::string& msg) {
        sol.status = status;
        sol.message = msg;
        sol.x = X;
        sol.z = Z;
        for (int k = 0; k < m; ++k) sol.y[kept[k]] = y[k];
        return sol;
    };

    // Best iterate seen, scored as the worst tolerance ratio. On a hard stop
    // (stalled step, singular Schur complement, iteration limit) an iterate
    // within a small multiple of the requested tolerances is still an answer;
    // ill-conditioned instances bottom out slightly above gap_tol in double
    // precision and rejecting them outright loses a solved problem.
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<Mat> best_x, best_z;
    std::vector<double> best_y;
    double best_pobj = 0.0, best_dobj = 0.0, best_gap = 0.0, best_pres = 0.0, best_dres = 0.0;
    auto finalize_soft = [&](const std::string& msg) {
        if (best_score <= 50.0) {
            X = best_x;
            Z = best_z;
            y = best_y;
            sol.primal_value = best_pobj;
            sol.dual_value = best_dobj;
            sol.gap = best_gap;
            sol.primal_residual = best_pres;
            sol.dual_residual = best_dres;
            return finalize(SdpStatus::optimal, "reduced accuracy: " + msg);
        }
        return finalize(SdpStatus::max_iter, msg);
    };

    std::vector<double> rp(m);
    std::vector<Mat> Rd(nb), Zinv(nb), G(nb), D(nb);
    std::vector<Mat> dXa(nb), dZa(nb), dX(nb), dZ(nb);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        sol.iterations = iter;
        double pobj = 0.0, dobj = 0.0;
        for (int b = 0; b < nb; ++b) pobj += herm_dot(C[b], X[b]);
        for (int k = 0; k < m; ++k) dobj += y[k] * rhs[k];
        double pinf = 0.0;
        for (int k = 0; k < m; ++k) {
            double ax = 0.0;
            for (int b = 0; b < nb; ++b) ax += herm_dot(A[k][b], X[b]);
            rp[k] = rhs[k] - ax;
            pinf = std::max(pinf, std::abs(rp[k]));
        }
        double dinf = 0.0;
        for (int b = 0; b < nb; ++b) {
            Rd[b] = C[b] - Z[b];
            for (int k = 0; k < m; ++k)
                if (y[k] != 0.0) Rd[b] -= y[k] * A[k][b];
            dinf = std::max(dinf, max_abs(Rd[b]));
        }
        const double gap_rel = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        sol.primal_value = pobj;
        sol.dual_value = dobj;
        sol.gap = gap_rel;
        sol.primal_residual = pinf / (1.0 + rhs_scale);
        sol.dual_residual = dinf / (1.0 + c_max);

        // Iteration trace for solver debugging (set QOTL_SDP_TRACE=1).
        static const bool trace_iters = std::getenv("QOTL_SDP_TRACE") != nullptr;
        if (trace_iters)
            std::fprintf(stderr, "sdp it=%3d pobj=%+.6e dobj=%+.6e gap=%.2e pinf=%.2e dinf=%.2e\n",
                         iter, pobj, dobj, gap_rel, sol.primal_residual, sol.dual_residual);

        const double score = std::max({gap_rel / opts.gap_tol,
                                       sol.primal_residual / opts.feas_tol,
                                       sol.dual_residual / opts.feas_tol});
        if (score < best_score) {
            best_score = score;
            best_x = X;
            best_z = Z;
            best_y = y;
            best_pobj = pobj;
            best_dobj = dobj;
            best_gap = gap_rel;
            best_pres = sol.primal_residual;
            best_dres = sol.dual_residual;
        }

        if (gap_rel <= opts.gap_tol && sol.primal_residual <= opts.feas_tol &&
            sol.dual_residual <= opts.feas_tol)
            return finalize(SdpStatus::optimal, "");

        // Divergence heuristics backed by explicit certificate checks.
        double y_max = 0.0;
        for (double v : y) y_max = std::max(y_max, std::abs(v));
        if (m > 0 && (dobj > 1e8 * (1.0 + rhs_scale) || y_max > 1e9)) {
            std::vector<double> ray(m_all, 0.0);
            for (int k = 0; k < m; ++k) ray[kept[k]] = y[k];
            if (farkas_certificate_valid(p, ray)) {
                sol.infeasible_ray = ray;
                return finalize(SdpStatus::infeasible, "dual objective diverged");
            }
        }
        if (pobj < -1e8 * (1.0 + c_max) && sol.primal_residual <= 1e-5) {
            return finalize(SdpStatus::unbounded, "primal objective diverged");
        }

        double mu = 0.0;
        for (int b = 0; b < nb; ++b) mu += trace_prod(X[b], Z[b]).real();
        mu /= total_n;

        Mat l;
        for (int b = 0; b < nb; ++b) {
            if (!chol_lower(Z[b], l)) return finalize_soft("dual iterate lost definiteness");
            Zinv[b] = chol_inverse(l);
        }

        // Schur complement M_kl = sum_b Re tr(A_k X A_l Z^{-1}).
        std::vector<double> schur(static_cast<size_t>(m) * m, 0.0);
        {
            // M_kl = sum_b Re tr(A_k X A_l Z^{-1}); the X factor must sit
            // between the two constraint matrices or definiteness is lost.
            std::vector<std::vector<Mat>> AX(m), AZ(m);
            for (int k = 0; k < m; ++k) {
                AX[k].resize(nb);
                AZ[k].resize(nb);
                for (int b = 0; b < nb; ++b) {
                    AX[k][b] = A[k][b] * X[b];
                    AZ[k][b] = A[k][b] * Zinv[b];
                }
            }
            for (int k = 0; k < m; ++k)
                for (int l2 = k; l2 < m; ++l2) {
                    double s = 0.0;
                    for (int b = 0; b < nb; ++b) s += trace_prod(AX[k][b], AZ[l2][b]).real();
                    schur[static_cast<size_t>(k) * m + l2] = s;
                    schur[static_cast<size_t>(l2) * m + k] = s;
                }
        }
        double schur_diag_max = 1e-300;
        for (int k = 0; k < m; ++k)
            schur_diag_max = std::max(schur_diag_max, schur[static_cast<size_t>(k) * m + k]);
        RealChol schur_chol;
        bool factored = false;
        for (double ridge : {0.0, 1e-14, 1e-12, 1e-10}) {
            if (schur_chol.factor(schur, m, ridge * schur_diag_max)) {
                factored = true;
                break;
            }
        }
        if (!factored && m > 0) {
            if (trace_iters) {
                double mx = 0.0;
                bool bad = false;
                for (double v : schur) {
                    if (!std::isfinite(v)) bad = true;
                    mx = std::max(mx, std::abs(v));
                }
                std::fprintf(stderr, "sdp schur fail: m=%d max=%.3e nonfinite=%d diag_max=%.3e\n",
                             m, mx, bad ? 1 : 0, schur_diag_max);
            }
            return finalize_soft("schur complement singular");
        }

        auto direction = [&](double sigma_mu, bool with_corrector,
                             std::vector<Mat>& dx, std::vector<Mat>& dz, std::vector<double>& dy) {
            for (int b = 0; b < nb; ++b) {
                Mat K = (-1.0) * (X[b] * Z[b]);
                if (sigma_mu != 0.0) {
                    for (int i = 0; i < K.rows; ++i) K(i, i) += sigma_mu;
                }
                if (with_corrector) K -= dXa[b] * dZa[b];
                G[b] = (K - X[b] * Rd[b]) * Zinv[b];
            }
            std::vector<double> rhs_k(m);
            for (int k = 0; k < m; ++k) {
                double s = 0.0;
                for (int b = 0; b < nb; ++b) s += trace_prod(A[k][b], G[b]).real();
                rhs_k[k] = rp[k] - s;
            }
            dy = m > 0 ? schur_chol.solve(rhs_k) : std::vector<double>();
            for (int b = 0; b < nb; ++b) {
                D[b] = Mat::zero(X[b].rows, X[b].cols);
                for (int k = 0; k < m; ++k)
                    if (dy[k] != 0.0) D[b] += dy[k] * A[k][b];
                dz[b] = Rd[b] - D[b];
                dx[b] = herm_part(G[b] + X[b] * D[b] * Zinv[b]);
            }
        };

        std::vector<double> dya, dyc;
        direction(0.0, false, dXa, dZa, dya);

        double ap_aff = 1.0, ad_aff = 1.0;
        for (int b = 0; b < nb; ++b) {
            ap_aff = std::min(ap_aff, step_max(X[b], dXa[b]));
            ad_aff = std::min(ad_aff, step_max(Z[b], dZa[b]));
        }
        double mu_aff = 0.0;
        for (int b = 0; b < nb; ++b)
            mu_aff += trace_prod(X[b] + ap_aff * dXa[b], Z[b] + ad_aff * dZa[b]).real();
        mu_aff /= total_n;
        double sigma = mu > 0.0 ? std::pow(std::max(mu_aff, 0.0) / mu, 3.0) : 0.0;
        sigma = std::clamp(sigma, 1e-10, 1.0);

        direction(sigma * mu, true, dX, dZ, dyc);

        double ap = std::min(1.0, 0.98 * std::min(1e100, [&] {
                        double a = 1e100;
                        for (int b = 0; b < nb; ++b) a = std::min(a, step_max(X[b], dX[b]));
                        return a;
                    }()));
        double ad = std::min(1.0, 0.98 * std::min(1e100, [&] {
                        double a = 1e100;
                        for (int b = 0; b < nb; ++b) a = std::min(a, step_max(Z[b], dZ[b]));
                        return a;
                    }()));

        // Definiteness backoff (Cholesky failure means the nominal step was too long).
        std::vector<Mat> Xn(nb), Zn(nb);
        bool ok = false;
        for (int tries = 0; tries < 12; ++tries) {
            for (int b = 0; b < nb; ++b) Xn[b] = X[b] + ap * dX[b];
            if (all_blocks_pd(Xn)) {
                ok = true;
                break;
            }
            ap *= 0.8;
        }
        if (!ok) return finalize_soft("primal step stalled");
        ok = false;
        for (int tries = 0; tries < 12; ++tries) {
            for (int b = 0; b < nb; ++b) Zn[b] = Z[b] + ad * dZ[b];
            if (all_blocks_pd(Zn)) {
                ok = true;
                break;
            }
            ad *= 0.8;
        }
        if (!ok) return finalize_soft("dual step stalled");

        X = Xn;
        Z = Zn;
        for (int k = 0; k < m; ++k) y[k] += ad * dyc[k];
    }

    // One last certificate attempt before reporting iteration exhaustion.
    {
        std::vector<double> ray(m_all, 0.0);
        for (int k = 0; k < m; ++k) ray[kept[k]] = y[k];
        if (sol.dual_value > 1e6 * (1.0 + rhs_scale) && farkas_certificate_valid(p, ray)) {
            sol.infeasible_ray = ray;
            return finalize(SdpStatus::infeasible, "dual objective diverged at iteration limit");
        }
    }
    return finalize_soft("iteration limit reached");
}

std::string sdp_dump(const SdpProblem& p) {
    std::ostringstream os;
    os.precision(17);
    os << "sdp blocks " << p.block_dims.size() << "\n";
    os << "dims";
    for (int d : p.block_dims) os << " " << d;
    os << "\n";
    auto dump_mat = [&os](int b, const Mat& m) {
        for (int i = 0; i < m.rows; ++i)
            for (int j = i; j < m.cols; ++j) {
                const cx v = m(i, j);
                if (v == cx(0.0, 0.0)) continue;
                os << b << " " << i << " " << j << " " << v.real() << " " << v.imag() << "\n";
            }
    };
    os << "objective\n";
    for (size_t b = 0; b < p.objective.size(); ++b) dump_mat(static_cast<int>(b), p.objective[b]);
    for (size_t k = 0; k < p.constraints.size(); ++k) {
        os << "constraint " << k << " rhs " << p.constraints[k].rhs << "\n";
        for (size_t b = 0; b < p.constraints[k].coeff.size(); ++b)
            dump_mat(static_cast<int>(b), p.constraints[k].coeff[b]);
    }
    os << "end\n";
    return os.str();
}

}  // namespace qotl
