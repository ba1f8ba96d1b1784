#include "qotl/predicates.hpp"

#include <cmath>

#include "qotl/json_io.hpp"

namespace qotl {

ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.inf || b.inf) return ExtReal::infinity();
    return ExtReal::finite(a.v + b.v);
}

ExtReal scale(double s, ExtReal a) {
    if (s < 0.0) throw std::invalid_argument("ExtReal scale: negative factor");
    if (s == 0.0) return ExtReal::finite(0.0);  // 0 * inf = 0
    if (a.inf) return ExtReal::infinity();
    return ExtReal::finite(s * a.v);
}

bool ext_leq(ExtReal a, ExtReal b, double tol) {
    if (b.inf) return true;  // inf <= inf included
    if (a.inf) return false;
    return a.v <= b.v + tol;
}

IVPredicate ivp_new(const Mat& finite_psd, const Mat& inf_proj) {
    if (!finite_psd.is_square()) throw std::invalid_argument("ivp_new: square matrix required");
    const int d = finite_psd.rows;
    Subspace x = Subspace::from_projector(inf_proj);
    if (x.dim != d) throw std::invalid_argument("ivp_new: dimension mismatch");
    Mat f = herm_part(finite_psd);
    const double lmin = lambda_min(f);
    if (lmin < -1e-9 * (1.0 + max_abs(f)))
        throw std::invalid_argument("ivp_new: finite part not positive semidefinite");
    Mat comp = Mat::identity(d) - x.proj;
    IVPredicate a;
    a.dim = d;
    a.finite = herm_part(comp * f * comp);
    a.inf_proj = x.proj;
    return a;
}

IVPredicate ivp_from_matrix(const Mat& finite_psd) {
    return ivp_new(finite_psd, Mat::zero(finite_psd.rows, finite_psd.cols));
}

IVPredicate ivp_zero(int dim) { return ivp_from_matrix(Mat::zero(dim, dim)); }
IVPredicate ivp_identity(int dim) { return ivp_from_matrix(Mat::identity(dim)); }

IVPredicate ivp_add(const IVPredicate& a, const IVPredicate& b) {
    if (a.dim != b.dim) throw std::invalid_argument("ivp_add: dimension mismatch");
    Mat join = sub_join(Subspace{a.dim, a.inf_proj}, Subspace{b.dim, b.inf_proj}).proj;
    return ivp_new(a.finite + b.finite, join);
}

IVPredicate ivp_tensor(const IVPredicate& a, const IVPredicate& b) {
    // Infinite subspace: (supp P_A (x) X_B) v (X_A (x) supp P_B) v (X_A (x) X_B).
    Mat sa = support_projector(a.finite);
    Mat sb = support_projector(b.finite);
    const int d = a.dim * b.dim;
    Subspace x1 = Subspace::from_projector(kron(sa, b.inf_proj));
    Subspace x2 = Subspace::from_projector(kron(a.inf_proj, sb));
    Subspace x3 = Subspace::from_projector(kron(a.inf_proj, b.inf_proj));
    Subspace xs = sub_join(sub_join(x1, x2), x3);
    (void)d;
    return ivp_new(kron(a.finite, b.finite), xs.proj);
}

IVPredicate ivp_conj(const Mat& m, const IVPredicate& a) {
    if (m.rows != a.dim) throw std::invalid_argument("ivp_conj: shape mismatch");
    Mat f = dagger(m) * a.finite * m;
    Mat xi = dagger(m) * a.inf_proj * m;  // PSD, support gives the new subspace
    return ivp_new(herm_part(f), support_projector(herm_part(xi)));
}

IVPredicate ivp_guard(const Subspace& x, const IVPredicate& a) {
    if (x.dim != a.dim) throw std::invalid_argument("ivp_guard: dimension mismatch");
    Mat comp = Mat::identity(x.dim) - x.proj;
    return ivp_add(a, ivp_new(Mat::zero(x.dim, x.dim), comp));
}

IVPredicate ivp_scale(double s, const IVPredicate& a) {
    if (s < 0.0) throw std::invalid_argument("ivp_scale: negative factor");
    if (s == 0.0) return ivp_zero(a.dim);
    return ivp_new(s * a.finite, a.inf_proj);
}

ExtReal ivp_trace(const IVPredicate& a, const Mat& rho) {
    if (rho.rows != a.dim || rho.cols != a.dim)
        throw std::invalid_argument("ivp_trace: dimension mismatch");
    const double tr = std::max(trace(rho).real(), 0.0);
    Mat overlap = a.inf_proj * rho * a.inf_proj;
    if (trace_norm(herm_part(overlap)) > 1e-9 * tr) return ExtReal::infinity();
    return ExtReal::finite(trace_prod(a.finite, rho).real());
}

bool ivp_leq(const IVPredicate& a, const IVPredicate& b, double tol) {
    if (a.dim != b.dim) throw std::invalid_argument("ivp_leq: dimension mismatch");
    // On X_B the comparison is trivially true; off X_B the predicate A must be
    // finite (X_A restricted there vanishes) and the compressed finite parts
    // must compare in the Loewner order.
    Mat pi = Mat::identity(b.dim) - b.inf_proj;
    Mat xa_restricted = pi * a.inf_proj * pi;
    if (max_abs(xa_restricted) > tol * (1.0 + max_abs(a.inf_proj))) return false;
    Mat fa = herm_part(pi * a.finite * pi);
    Mat fb = herm_part(pi * b.finite * pi);
    return loewner_leq(fa, fb, tol);
}

nlohmann::json ivp_to_json(const IVPredicate& a) {
    nlohmann::json j;
    j["finite"] = mat_to_json(a.finite);
    if (max_abs(a.inf_proj) > 0.0)
        j["infinite_projector"] = mat_to_json(a.inf_proj);
    else
        j["infinite_projector"] = nullptr;
    return j;
}

IVPredicate ivp_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.contains("finite")) {
        Mat f = mat_from_json(j.at("finite"));
        Mat x = Mat::zero(f.rows, f.cols);
        if (j.contains("infinite_projector") && !j.at("infinite_projector").is_null())
            x = mat_from_json(j.at("infinite_projector"));
        return ivp_new(f, x);
    }
    // A bare matrix is accepted as a purely finite predicate.
    return ivp_from_matrix(mat_from_json(j));
}

}  // namespace qotl
