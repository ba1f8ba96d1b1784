#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qotl {

using cx = std::complex<double>;

// Dense complex matrix, row-major storage.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<cx> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {
        if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative dimension");
    }

    static Mat zero(int r, int c) { return Mat(r, c); }
    static Mat identity(int n);

    cx& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    const cx& operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    bool is_square() const { return rows == cols; }
    size_t size() const { return a.size(); }
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator-(const Mat& x);
Mat operator*(const Mat& x, const Mat& y);
Mat operator*(cx s, const Mat& x);
Mat operator*(double s, const Mat& x);
Mat& operator+=(Mat& x, const Mat& y);
Mat& operator-=(Mat& x, const Mat& y);

Mat dagger(const Mat& x);
Mat transpose(const Mat& x);
Mat conj(const Mat& x);
Mat kron(const Mat& x, const Mat& y);
cx trace(const Mat& x);

// tr(x * y), computed without forming the product.
cx trace_prod(const Mat& x, const Mat& y);

// Frobenius inner product Re tr(x^dag y); real for Hermitian pairs.
double herm_dot(const Mat& x, const Mat& y);

double max_abs(const Mat& x);
double fro_norm(const Mat& x);
bool approx_equal(const Mat& x, const Mat& y, double tol);

// (x + x^dag)/2
Mat herm_part(const Mat& x);
bool is_hermitian(const Mat& x, double tol);

// Partial trace over one tensor factor of a (d1*d2)-dimensional operator.
// keep == 1 returns the d1-dim factor, keep == 2 the d2-dim factor.
// System 1 is the left Kronecker factor.
Mat partial_trace(const Mat& x, int keep, int d1, int d2);

// Column-stacking vectorisation and its inverse.
Mat vec_col(const Mat& x);
Mat unvec_col(const Mat& v, int rows, int cols);

}  // namespace qotl
