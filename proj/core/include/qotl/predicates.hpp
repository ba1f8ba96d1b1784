#pragma once

#include <json.hpp>

#include "qotl/linalg.hpp"

namespace qotl {

// Extended real: a finite double or +infinity. Arithmetic follows the
// conventions inf + a = inf, inf * 0 = 0, inf <= inf.
struct ExtReal {
    double v = 0.0;
    bool inf = false;

    static ExtReal finite(double x) { return ExtReal{x, false}; }
    static ExtReal infinity() { return ExtReal{0.0, true}; }

    bool is_inf() const { return inf; }
    double value() const { return v; }  // only meaningful when finite
};

ExtReal operator+(ExtReal a, ExtReal b);
ExtReal scale(double s, ExtReal a);  // s >= 0; 0 * inf = 0
bool ext_leq(ExtReal a, ExtReal b, double tol = 0.0);

// Predicate P + inf * Pi_X in canonical form: the finite part is PSD and
// satisfies finite * inf_proj = 0 (within 1e-9), inf_proj is a projector.
struct IVPredicate {
    int dim = 0;
    Mat finite;
    Mat inf_proj;
};

// Canonicalizes: projects the finite part onto the complement of the infinite
// subspace. Validates PSD-ness of the finite part and the projector invariant.
IVPredicate ivp_new(const Mat& finite_psd, const Mat& inf_proj);
IVPredicate ivp_from_matrix(const Mat& finite_psd);  // empty infinite part
IVPredicate ivp_zero(int dim);
IVPredicate ivp_identity(int dim);

IVPredicate ivp_add(const IVPredicate& a, const IVPredicate& b);
IVPredicate ivp_tensor(const IVPredicate& a, const IVPredicate& b);
// M^dag A M interpreted on infinite-valued predicates.
IVPredicate ivp_conj(const Mat& m, const IVPredicate& a);
// Guard (X | A) = A + inf * X^perp: forces states into the subspace X.
IVPredicate ivp_guard(const Subspace& x, const IVPredicate& a);
IVPredicate ivp_scale(double s, const IVPredicate& a);  // s >= 0

// tr(A rho): +inf iff rho overlaps the infinite subspace beyond
// 1e-9 * tr(rho) in trace norm.
ExtReal ivp_trace(const IVPredicate& a, const Mat& rho);

// Pointwise order: <psi|A|psi> <= <psi|B|psi> for all psi. Decided through
// the infinite subspaces plus a Loewner comparison of the compressed finite
// parts.
bool ivp_leq(const IVPredicate& a, const IVPredicate& b, double tol = 1e-9);

// Wire format: {"finite": <matrix>, "infinite_projector": <matrix or null>}.
nlohmann::json ivp_to_json(const IVPredicate& a);
IVPredicate ivp_from_json(const nlohmann::json& j);

}  // namespace qotl
