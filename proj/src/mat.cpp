#include "v2t/mat.hpp"

#include <Eigen/Dense>

namespace v2t {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

}  // namespace

void gemm_nn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
    assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
    CMap ma(a.data(), a.rows, a.cols);
    CMap mb(b.data(), b.rows, b.cols);
    Map mc(c.data(), c.rows, c.cols);
    if (accumulate) {
        mc.noalias() += ma * mb;
    } else {
        mc.noalias() = ma * mb;
    }
}

void gemm_nt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
    assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
    CMap ma(a.data(), a.rows, a.cols);
    CMap mb(b.data(), b.rows, b.cols);
    Map mc(c.data(), c.rows, c.cols);
    if (accumulate) {
        mc.noalias() += ma * mb.transpose();
    } else {
        mc.noalias() = ma * mb.transpose();
    }
}

void gemm_tn(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
    assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
    CMap ma(a.data(), a.rows, a.cols);
    CMap mb(b.data(), b.rows, b.cols);
    Map mc(c.data(), c.rows, c.cols);
    if (accumulate) {
        mc.noalias() += ma.transpose() * mb;
    } else {
        mc.noalias() = ma.transpose() * mb;
    }
}

}  // namespace v2t
