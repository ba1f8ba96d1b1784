#pragma once

#include <optional>
#include <string>

#include "qotl/predicates.hpp"
#include "qotl/sdp.hpp"

namespace qotl {

enum class TransportMode { exact, partial };

// Strassen-style dual certificate. The exact variant uses (Y1, Y2) with
//   Y1, Y2 >= 0  and  Y1 (x) I - I (x) Y2 <= cost,
// refuting "transport <= eps" through tr(Y1 rho1) - tr(Y2 rho2) > eps.
// The partial variant adds scalars with
//   0 <= y1 <= y2,  Y1 <= y2 I,  y1 I <= Y2,
// refuting through y1(1-tr rho1) + tr(Y1 rho1) - y2(1-tr rho2) - tr(Y2 rho2).
struct TransportCertificate {
    bool partial = false;
    double y1 = 0.0;
    double y2 = 0.0;
    Mat big_y1;
    Mat big_y2;
};

double certificate_value(const TransportCertificate& c, const Mat& rho1, const Mat& rho2);
// Verifies the order conditions above against the (finite PSD) cost.
bool certificate_feasible(const TransportCertificate& c, const Mat& cost, double tol = 1e-7);

struct TransportOptions {
    SdpOptions sdp;
    // Recover a dual certificate with a second capped solve when the duals of
    // a support-reduced or trace-tightened problem fail to lift. Off by
    // default: falsifier loops call transport_value in bulk and only need the
    // value.
    bool complete_dual = false;
};

struct TransportResult {
    ExtReal value;
    std::optional<Mat> witness;  // optimal coupling; absent when value = +inf
    std::optional<TransportCertificate> dual_certificate;  // finite costs only
    double gap = 0.0;
    SdpStatus solver_status = SdpStatus::max_iter;
    std::string message;
};

// Marginal equalities tr_2(rho) = rho1 and tr_1(rho) = rho2 within tol.
bool is_coupling(const Mat& rho, const Mat& rho1, const Mat& rho2, double tol = 1e-9);
// tr_2(rho) <= rho1, tr_1(rho) <= rho2 (Loewner), tr rho1 + tr rho2 <= 1 + tr rho.
bool is_partial_coupling(const Mat& rho, const Mat& rho1, const Mat& rho2, double tol = 1e-9);

// Minimal transport cost over couplings (exact) or partial couplings of
// (rho1, rho2). Infinite cost directions X_C restrict the coupling support to
// the complement; an empty restricted feasible set yields value = +inf.
// Exact mode requires |tr rho1 - tr rho2| <= 1e-9 (the coupling set is empty
// otherwise and no value is defined); violations throw std::invalid_argument.
TransportResult transport_value(const IVPredicate& cost, const DensityOperator& rho1,
                                const DensityOperator& rho2, TransportMode mode,
                                const TransportOptions& opts = {});

struct LiftingResult {
    bool holds = false;
    ExtReal value;               // the transport value backing the decision
    std::optional<Mat> witness;  // optimal coupling when holds
    std::optional<TransportCertificate> certificate;  // violation proof when not
    double gap = 0.0;
};

// Decides rho1 X#_eps rho2: exists a coupling with tr(cost . rho) <= eps.
// Requires tr(rho1) = tr(rho2) within 1e-9.
LiftingResult lifting_check(const DensityOperator& rho1, const HermitianOperator& cost,
                            ExtReal eps, const DensityOperator& rho2,
                            const TransportOptions& opts = {});

// Same question over partial couplings; certificates are quadruples.
LiftingResult partial_strassen_check(const DensityOperator& rho1, const DensityOperator& rho2,
                                     const HermitianOperator& cost, ExtReal eps,
                                     const TransportOptions& opts = {});

// State extension rho + (1 - tr rho)|*><*| on dimension d+1 (the star symbol
// is the added last basis vector).
Mat star_state(const Mat& rho);
// Cost embedding A (+) 0 from H1 (x) H2 into (H1 + *) (x) (H2 + *).
Mat star_cost(const Mat& a, int d1, int d2);
// Lifts a partial coupling of (rho1, rho2) to an exact coupling of the star
// extensions. Throws when rho is not a partial coupling (tol 1e-7).
Mat star_lift(const Mat& rho, const Mat& rho1, const Mat& rho2);

// Stabilized transport T_s(rho, sigma) = T(rho (x) I/2, sigma (x) I/2) at the
// antisymmetric-projector cost on the extended spaces. Requires unit traces.
TransportResult t_stab(const DensityOperator& rho, const DensityOperator& sigma,
                       const TransportOptions& opts = {});

// Haar average of (U (x) U)^dag X (U (x) U) in closed form (test oracle).
Mat uu_twirl(const Mat& x);

}  // namespace qotl
