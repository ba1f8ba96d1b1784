#pragma once

#include "qotl/matrix.hpp"

namespace qotl {

// Relative tolerances are taken w.r.t. the max-norm of the operands with an
// absolute floor of 1e-12.
inline double tol_scale(double base, double norm) { return base * (1.0 + norm); }
constexpr double kTolFloor = 1e-12;

struct EigResult {
    std::vector<double> values;  // descending
    Mat vectors;                 // columns; unitary
};

// Hermitian eigendecomposition via cyclic complex Jacobi rotations.
// Deterministic: fixed sweep order, no pivot search.
EigResult herm_eig(const Mat& a);

double lambda_min(const Mat& herm);
double lambda_max(const Mat& herm);

// a <= b in the Loewner order: lambda_min(b - a) >= -tol*(1 + max_abs(b - a)).
bool loewner_leq(const Mat& a, const Mat& b, double tol = 1e-9);

// Projector onto the span of eigenvectors with eigenvalue > threshold*lambda_max.
// Throws if a has an eigenvalue below -threshold*(1 + |lambda|_max).
Mat support_projector(const Mat& a, double threshold = 1e-9);

// Trace norm of a Hermitian matrix (sum of |eigenvalues|).
double trace_norm(const Mat& herm);

// Positive part: sum over positive eigenvalues of lambda * v v^dag.
Mat positive_part(const Mat& herm);
// tr[(herm)_+]
double positive_part_trace(const Mat& herm);

// Real basis of Hermitian d x d matrices, ordered by (i, j >= i):
// E_ii, then for i < j the pair |j><i| + |i><j| and i|j><i| - i|i><j|.
std::vector<Mat> hermitian_basis(int d);

struct Subspace {
    int dim = 0;  // ambient dimension
    Mat proj;     // orthogonal projector, idempotent within 1e-9

    static Subspace full(int d);
    static Subspace zero(int d);
    static Subspace from_projector(const Mat& p, double tol = 1e-9);
};

Subspace sub_join(const Subspace& x, const Subspace& y);
Subspace sub_meet(const Subspace& x, const Subspace& y);
Subspace sub_complement(const Subspace& x);

struct SymProjectors {
    Mat p_sym;    // (I + SWAP)/2
    Mat p_asym;   // (I - SWAP)/2
    Mat swap_op;  // SWAP |i,j> = |j,i>
};

Mat swap_operator(int d);
SymProjectors sym_projectors(int d);

// Validated wrappers. Construction checks the stated invariants and throws
// std::invalid_argument on violation.
struct HermitianOperator {
    int dim = 0;
    Mat m;
    // ||a - a^dag||_max <= 1e-12 * (1 + ||a||_max)
    static HermitianOperator make(const Mat& a);
};

struct DensityOperator {
    int dim = 0;
    Mat m;
    bool trace_one = false;  // trace within 1e-9 of 1
    // PSD up to psd_tol, trace <= 1 + 1e-9
    static DensityOperator make(const Mat& a, double psd_tol = 1e-9);
};

// Cholesky factor L with a = L L^dag, L lower triangular.
// Returns false if a pivot fails (matrix not positive definite).
bool chol_lower(const Mat& a, Mat& l);
// Solve L x = b for lower-triangular L.
Mat tri_solve_lower(const Mat& l, const Mat& b);
Mat chol_inverse(const Mat& l);  // (L L^dag)^{-1} from the factor

}  // namespace qotl
