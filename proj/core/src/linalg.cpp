#include "qotl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qotl {

namespace {

double off_diag_max(const Mat& a) {
    double m = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j)
            if (i != j) m = std::max(m, std::abs(a(i, j)));
    return m;
}

}  // namespace

EigResult herm_eig(const Mat& input) {
    if (!input.is_square()) throw std::invalid_argument("herm_eig: square matrix required");
    const int n = input.rows;
    Mat a = herm_part(input);
    Mat v = Mat::identity(n);

    if (n <= 1) {
        EigResult r;
        r.vectors = v;
        if (n == 1) r.values.push_back(a(0, 0).real());
        return r;
    }

    const double scale = std::max(1.0, max_abs(a));
    const double off_tol = 1e-14 * scale;
    const int max_sweeps = 64;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diag_max(a) <= off_tol) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const cx apq = a(p, q);
                const double g = std::abs(apq);
                if (g <= 1e-300) continue;
                // Phase factor reducing the 2x2 block to a real symmetric one,
                // then a standard Jacobi rotation on that block.
                const cx u = std::conj(apq) / g;  // e^{-i phi}
                const double alpha = a(p, p).real();
                const double beta = a(q, q).real();
                const double tau = (beta - alpha) / (2.0 * g);
                const double t =
                    (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // Columns: A <- A * J with J = [[c, s], [-u s, u c]] on (p, q).
                for (int k = 0; k < n; ++k) {
                    const cx akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * u * akq;
                    a(k, q) = s * akp + c * u * akq;
                }
                // Rows: A <- J^dag * A.
                for (int k = 0; k < n; ++k) {
                    const cx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * std::conj(u) * aqk;
                    a(q, k) = s * apk + c * std::conj(u) * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = cx(a(p, p).real(), 0.0);
                a(q, q) = cx(a(q, q).real(), 0.0);
                for (int k = 0; k < n; ++k) {
                    const cx vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * u * vkq;
                    v(k, q) = s * vkp + c * u * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return a(i, i).real() > a(j, j).real();
    });

    EigResult r;
    r.values.resize(n);
    r.vectors = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        r.values[j] = a(order[j], order[j]).real();
        for (int i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
    }
    return r;
}

double lambda_min(const Mat& herm) {
    auto e = herm_eig(herm);
    return e.values.empty() ? 0.0 : e.values.back();
}

double lambda_max(const Mat& herm) {
    auto e = herm_eig(herm);
    return e.values.empty() ? 0.0 : e.values.front();
}

bool loewner_leq(const Mat& a, const Mat& b, double tol) {
    Mat d = b - a;
    return lambda_min(d) >= -tol * (1.0 + max_abs(d));
}

Mat support_projector(const Mat& a, double threshold) {
    auto e = herm_eig(a);
    const int n = a.rows;
    double abs_max = 0.0;
    for (double v : e.values) abs_max = std::max(abs_max, std::abs(v));
    if (!e.values.empty() && e.values.back() < -threshold * (1.0 + abs_max))
        throw std::invalid_argument("support_projector: matrix has a negative eigenvalue");
    Mat p = Mat::zero(n, n);
    if (e.values.empty()) return p;
    const double lam_max = e.values.front();
    if (lam_max <= kTolFloor * (1.0 + max_abs(a))) return p;  // numerically zero matrix
    const double cutoff = threshold * lam_max;
    for (int j = 0; j < n; ++j) {
        if (e.values[j] <= cutoff) continue;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                p(i, k) += e.vectors(i, j) * std::conj(e.vectors(k, j));
    }
    return p;
}

double trace_norm(const Mat& herm) {
    auto e = herm_eig(herm);
    double s = 0.0;
    for (double v : e.values) s += std::abs(v);
    return s;
}

Mat positive_part(const Mat& herm) {
    auto e = herm_eig(herm);
    const int n = herm.rows;
    Mat p = Mat::zero(n, n);
    for (int j = 0; j < n; ++j) {
        if (e.values[j] <= 0.0) continue;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                p(i, k) += e.values[j] * e.vectors(i, j) * std::conj(e.vectors(k, j));
    }
    return p;
}

double positive_part_trace(const Mat& herm) {
    auto e = herm_eig(herm);
    double s = 0.0;
    for (double v : e.values)
        if (v > 0.0) s += v;
    return s;
}

Subspace Subspace::full(int d) { return Subspace{d, Mat::identity(d)}; }
Subspace Subspace::zero(int d) { return Subspace{d, Mat::zero(d, d)}; }

Subspace Subspace::from_projector(const Mat& p, double tol) {
    if (!p.is_square()) throw std::invalid_argument("Subspace: square matrix required");
    if (!is_hermitian(p, tol * (1.0 + max_abs(p))))
        throw std::invalid_argument("Subspace: projector not Hermitian");
    if (max_abs(p * p - p) > tol * (1.0 + max_abs(p)))
        throw std::invalid_argument("Subspace: projector not idempotent");
    return Subspace{p.rows, herm_part(p)};
}

Subspace sub_join(const Subspace& x, const Subspace& y) {
    if (x.dim != y.dim) throw std::invalid_argument("sub_join: dimension mismatch");
    return Subspace{x.dim, support_projector(x.proj + y.proj)};
}

Subspace sub_complement(const Subspace& x) {
    return Subspace{x.dim, Mat::identity(x.dim) - x.proj};
}

Subspace sub_meet(const Subspace& x, const Subspace& y) {
    return sub_complement(sub_join(sub_complement(x), sub_complement(y)));
}

Mat swap_operator(int d) {
    Mat s(d * d, d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s(i * d + j, j * d + i) = 1.0;
    return s;
}

SymProjectors sym_projectors(int d) {
    SymProjectors r;
    r.swap_op = swap_operator(d);
    Mat id = Mat::identity(d * d);
    r.p_sym = 0.5 * (id + r.swap_op);
    r.p_asym = 0.5 * (id - r.swap_op);
    return r;
}

HermitianOperator HermitianOperator::make(const Mat& a) {
    if (!a.is_square()) throw std::invalid_argument("HermitianOperator: square matrix required");
    if (max_abs(a - dagger(a)) > tol_scale(1e-12, max_abs(a)))
        throw std::invalid_argument("HermitianOperator: matrix not Hermitian");
    return HermitianOperator{a.rows, herm_part(a)};
}

DensityOperator DensityOperator::make(const Mat& a, double psd_tol) {
    auto h = HermitianOperator::make(a);
    const double lmin = lambda_min(h.m);
    if (lmin < -psd_tol * (1.0 + max_abs(h.m)))
        throw std::invalid_argument("DensityOperator: matrix not positive semidefinite");
    const double tr = trace(h.m).real();
    if (tr > 1.0 + 1e-9) throw std::invalid_argument("DensityOperator: trace exceeds one");
    if (tr < -1e-9) throw std::invalid_argument("DensityOperator: negative trace");
    DensityOperator d;
    d.dim = h.dim;
    d.m = h.m;
    d.trace_one = std::abs(tr - 1.0) <= 1e-9;
    return d;
}

bool chol_lower(const Mat& a, Mat& l) {
    if (!a.is_square()) return false;
    const int n = a.rows;
    l = Mat::zero(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            cx s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return true;
}

Mat tri_solve_lower(const Mat& l, const Mat& b) {
    const int n = l.rows;
    Mat x = b;
    for (int col = 0; col < b.cols; ++col) {
        for (int i = 0; i < n; ++i) {
            cx s = x(i, col);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, col);
            x(i, col) = s / l(i, i);
        }
    }
    return x;
}

Mat chol_inverse(const Mat& l) {
    Mat m = tri_solve_lower(l, Mat::identity(l.rows));  // L^{-1}
    return dagger(m) * m;
}

std::vector<Mat> hermitian_basis(int d) {
    std::vector<Mat> out;
    out.reserve(static_cast<size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            if (i == j) {
                Mat m = Mat::zero(d, d);
                m(i, i) = 1.0;
                out.push_back(std::move(m));
            } else {
                Mat h1 = Mat::zero(d, d);
                h1(j, i) = 1.0;
                h1(i, j) = 1.0;
                out.push_back(std::move(h1));
                Mat h2 = Mat::zero(d, d);
                h2(j, i) = cx(0.0, 1.0);
                h2(i, j) = cx(0.0, -1.0);
                out.push_back(std::move(h2));
            }
        }
    return out;
}

}  // namespace qotl
