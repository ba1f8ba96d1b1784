#pragma once

#include <optional>
#include <string>

#include "qotl/matrix.hpp"

namespace qotl {

// Equality-form semidefinite program over block-diagonal Hermitian variables:
//   minimize    sum_b Re tr(C_b X_b)
//   subject to  sum_b Re tr(A_{k,b} X_b) = rhs_k   for k = 1..m
//               X_b >= 0
// Inequalities are expressed at the modeling layer through explicit PSD slack
// blocks. All coefficient matrices must be Hermitian.
struct SdpConstraint {
    std::vector<Mat> coeff;  // one Hermitian matrix per block (zero matrices allowed)
    double rhs = 0.0;
};

struct SdpProblem {
    std::vector<int> block_dims;
    std::vector<Mat> objective;
    std::vector<SdpConstraint> constraints;
};

enum class SdpStatus { optimal, infeasible, unbounded, max_iter };

const char* sdp_status_name(SdpStatus s);

struct SdpSolution {
    SdpStatus status = SdpStatus::max_iter;
    std::vector<Mat> x;      // primal blocks
    std::vector<Mat> z;      // dual slack blocks
    std::vector<double> y;   // multipliers, indexed by original constraints
    double primal_value = 0.0;
    double dual_value = 0.0;
    double gap = 0.0;        // relative duality gap
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    // Farkas ray for primal infeasibility: sum_k y_k A_{k,b} <= 0 per block
    // with rhs^T y > 0.
    std::vector<double> infeasible_ray;
    std::string message;
};

struct SdpOptions {
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    int max_iter = 200;
    std::string dump_path;  // when nonempty, append sdp_dump of each problem here
};

// Deterministic primal-dual interior point method (predictor-corrector with
// the XZ-symmetrized direction). Throws std::invalid_argument on malformed
// input (shape mismatches, non-Hermitian data, empty blocks).
SdpSolution sdp_solve(const SdpProblem& p, const SdpOptions& opts = {});

// Line-oriented debug dump: block dims, then sparse triplets of the objective
// and each constraint.
std::string sdp_dump(const SdpProblem& p);

}  // namespace qotl
