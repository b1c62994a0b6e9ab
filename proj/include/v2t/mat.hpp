#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace v2t {

// Dense row-major matrix of doubles. Small by design; heavy products go
// through the Eigen-backed gemm helpers in mat.cpp.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return d[static_cast<std::size_t>(r) * cols + c];
    }
    double operator()(int r, int c) const {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return d[static_cast<std::size_t>(r) * cols + c];
    }

    double* data() { return d.data(); }
    const double* data() const { return d.data(); }
    std::size_t size() const { return d.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    void set_zero() { std::fill(d.begin(), d.end(), 0.0); }

    static Mat zeros_like(const Mat& o) { return Mat(o.rows, o.cols); }
};

// C (+)= op(A) * op(B); accumulate=false overwrites C.
void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate);
void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate);

}  // namespace v2t
