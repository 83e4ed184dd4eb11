#pragma once

#include <Eigen/SVD>

#include <cmath>

#include "onestory/core.hpp"

namespace onestory {

/// Thin factors of a k x D matrix: u (k x r), sigma (r, non-increasing), vt (r x D), r = min(k, D).
struct SvdFactors {
    Matrix u;
    Vector sigma;
    Matrix vt;

    Matrix reconstruct() const { return u * sigma.asDiagonal() * vt; }

    /// Rebuilds the matrix with replacement singular values.
    Matrix reconstruct(const Vector& new_sigma) const { return u * new_sigma.asDiagonal() * vt; }
};

/// Thin SVD with a deterministic sign convention: the largest-magnitude entry
/// of every left singular vector is positive (first index wins ties).
inline SvdFactors thin_svd(const Matrix& x) {
    if (x.rows() < 1 || x.cols() < 1) {
        throw Error(ErrorKind::ShapeMismatch, "SVD input must be non-empty");
    }
    if (!x.allFinite()) {
        throw Error(ErrorKind::NonFinite, "SVD input contains NaN or Inf");
    }
    const Eigen::MatrixXd dense = x;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericFailure, "Jacobi SVD did not converge");
    }

    SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
    for (Eigen::Index c = 0; c < f.u.cols(); ++c) {
        Eigen::Index pivot = 0;
        f.u.col(c).cwiseAbs().maxCoeff(&pivot);
        if (f.u(pivot, c) < 0.0) {
            f.u.col(c) *= -1.0;
            f.vt.row(c) *= -1.0;
        }
    }
    if (!f.u.allFinite() || !f.sigma.allFinite() || !f.vt.allFinite()) {
        throw Error(ErrorKind::NumericFailure, "SVD produced non-finite factors");
    }
    return f;
}

}  // namespace onestory
