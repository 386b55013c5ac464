#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <span>

namespace depulse {

// AR(P) description of the clean signal: x(n) = sum_i a_i x(n-i) + e(n),
// e white with variance sigma_e2.
struct ArModel {
    Eigen::VectorXd a;  // a_1 .. a_P
    double sigma_e2 = 0.0;

    int order() const { return static_cast<int>(a.size()); }
};

// Least-squares fit minimizing the forward prediction error over
// n = P .. len-1 (no pre-windowing); sigma_e2 is the mean squared residual
// over the same range. Ill-conditioned normal equations get a small ridge
// and a warning on stderr; an all-zero input raises DegenerateSignalError.
ArModel estimate_ar_covariance(std::span<const double> samples, int order);

// Contiguous three-way split of a block of n samples (0-based indices):
//   i0 = [0, n0)        region preceding the degradation
//   i1 = [n0, n0+m)     initial discontinuity
//   i2 = [n0+m, n)      pulse tail
struct SegmentPartition {
    int n0 = 0;
    int m = 0;
    int n = 0;

    int i2_start() const { return n0 + m; }
    int n2() const { return n - n0 - m; }
    void validate() const;  // throws PartitionError
};

// Banded prediction-error matrix of size (N-P) x N: row r applies the AR
// residual at sample r+P, i.e. entries (-a_P ... -a_1, 1) ending at column
// r+P. (A*x)(r) equals the innovation estimate at sample r+P.
Eigen::SparseMatrix<double> build_prediction_matrix(const ArModel& model, int n);

// Column split of the prediction matrix by partition region. In a2 the
// coefficient entries are dropped and only the unit entries survive,
// implementing the degenerate order-zero model under the tail.
struct PartitionedPredictor {
    Eigen::SparseMatrix<double> a0, a1, a2;  // each (n-P) rows
    SegmentPartition part;
    int order = 0;

    int rows() const { return part.n - order; }
};

PartitionedPredictor partition_predictor(const Eigen::SparseMatrix<double>& full,
                                         const SegmentPartition& part, int order);

// Convenience: build + partition in one step.
PartitionedPredictor build_partitioned_predictor(const ArModel& model,
                                                 const SegmentPartition& part);

}  // namespace depulse
