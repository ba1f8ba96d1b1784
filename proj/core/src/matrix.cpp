#include "qotl/matrix.hpp"

#include <cmath>

namespace qotl {

namespace {
void check_same_shape(const Mat& x, const Mat& y, const char* op) {
    if (x.rows != y.rows || x.cols != y.cols)
        throw std::invalid_argument(std::string("Mat ") + op + ": shape mismatch");
}
}  // namespace

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat operator+(const Mat& x, const Mat& y) {
    check_same_shape(x, y, "+");
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    check_same_shape(x, y, "-");
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
    return r;
}

Mat operator-(const Mat& x) {
    Mat r = x;
    for (auto& v : r.a) v = -v;
    return r;
}

Mat& operator+=(Mat& x, const Mat& y) {
    check_same_shape(x, y, "+=");
    for (size_t i = 0; i < x.a.size(); ++i) x.a[i] += y.a[i];
    return x;
}

Mat& operator-=(Mat& x, const Mat& y) {
    check_same_shape(x, y, "-=");
    for (size_t i = 0; i < x.a.size(); ++i) x.a[i] -= y.a[i];
    return x;
}

Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("Mat *: inner dimension mismatch");
    Mat r(x.rows, y.cols);
    // ikj loop order keeps the inner accesses contiguous.
    for (int i = 0; i < x.rows; ++i) {
        const cx* xrow = &x.a[static_cast<size_t>(i) * x.cols];
        cx* rrow = &r.a[static_cast<size_t>(i) * y.cols];
        for (int k = 0; k < x.cols; ++k) {
            const cx f = xrow[k];
            if (f == cx(0.0, 0.0)) continue;
            const cx* yrow = &y.a[static_cast<size_t>(k) * y.cols];
            for (int j = 0; j < y.cols; ++j) rrow[j] += f * yrow[j];
        }
    }
    return r;
}

Mat operator*(cx s, const Mat& x) {
    Mat r = x;
    for (auto& v : r.a) v *= s;
    return r;
}

Mat operator*(double s, const Mat& x) { return cx(s, 0.0) * x; }

Mat dagger(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = std::conj(x(i, j));
    return r;
}

Mat transpose(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
    return r;
}

Mat conj(const Mat& x) {
    Mat r = x;
    for (auto& v : r.a) v = std::conj(v);
    return r;
}

Mat kron(const Mat& x, const Mat& y) {
    Mat r(x.rows * y.rows, x.cols * y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) {
            const cx f = x(i, j);
            if (f == cx(0.0, 0.0)) continue;
            for (int k = 0; k < y.rows; ++k)
                for (int l = 0; l < y.cols; ++l)
                    r(i * y.rows + k, j * y.cols + l) = f * y(k, l);
        }
    return r;
}

cx trace(const Mat& x) {
    if (!x.is_square()) throw std::invalid_argument("trace: square matrix required");
    cx t = 0.0;
    for (int i = 0; i < x.rows; ++i) t += x(i, i);
    return t;
}

cx trace_prod(const Mat& x, const Mat& y) {
    if (x.cols != y.rows || x.rows != y.cols)
        throw std::invalid_argument("trace_prod: shape mismatch");
    cx t = 0.0;
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) t += x(i, k) * y(k, i);
    return t;
}

double herm_dot(const Mat& x, const Mat& y) {
    check_same_shape(x, y, "herm_dot");
    double t = 0.0;
    for (size_t i = 0; i < x.a.size(); ++i)
        t += x.a[i].real() * y.a[i].real() + x.a[i].imag() * y.a[i].imag();
    return t;
}

double max_abs(const Mat& x) {
    double m = 0.0;
    for (const auto& v : x.a) m = std::max(m, std::abs(v));
    return m;
}

double fro_norm(const Mat& x) {
    double s = 0.0;
    for (const auto& v : x.a) s += std::norm(v);
    return std::sqrt(s);
}

bool approx_equal(const Mat& x, const Mat& y, double tol) {
    if (x.rows != y.rows || x.cols != y.cols) return false;
    return max_abs(x - y) <= tol;
}

Mat herm_part(const Mat& x) {
    if (!x.is_square()) throw std::invalid_argument("herm_part: square matrix required");
    Mat r(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j)
            r(i, j) = 0.5 * (x(i, j) + std::conj(x(j, i)));
    return r;
}

bool is_hermitian(const Mat& x, double tol) {
    if (!x.is_square()) return false;
    for (int i = 0; i < x.rows; ++i)
        for (int j = i; j < x.cols; ++j)
            if (std::abs(x(i, j) - std::conj(x(j, i))) > tol) return false;
    return true;
}

Mat partial_trace(const Mat& x, int keep, int d1, int d2) {
    if (x.rows != d1 * d2 || x.cols != d1 * d2)
        throw std::invalid_argument("partial_trace: dimension mismatch");
    if (keep == 1) {
        Mat r(d1, d1);
        for (int i = 0; i < d1; ++i)
            for (int j = 0; j < d1; ++j) {
                cx t = 0.0;
                for (int s = 0; s < d2; ++s) t += x(i * d2 + s, j * d2 + s);
                r(i, j) = t;
            }
        return r;
    }
    if (keep == 2) {
        Mat r(d2, d2);
        for (int i = 0; i < d2; ++i)
            for (int j = 0; j < d2; ++j) {
                cx t = 0.0;
                for (int s = 0; s < d1; ++s) t += x(s * d2 + i, s * d2 + j);
                r(i, j) = t;
            }
        return r;
    }
    throw std::invalid_argument("partial_trace: keep must be 1 or 2");
}

Mat vec_col(const Mat& x) {
    Mat v(x.rows * x.cols, 1);
    for (int j = 0; j < x.cols; ++j)
        for (int i = 0; i < x.rows; ++i) v(j * x.rows + i, 0) = x(i, j);
    return v;
}

Mat unvec_col(const Mat& v, int rows, int cols) {
    if (v.cols != 1 || v.rows != rows * cols)
        throw std::invalid_argument("unvec_col: shape mismatch");
    Mat x(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) x(i, j) = v(j * rows + i, 0);
    return x;
}

}  // namespace qotl
