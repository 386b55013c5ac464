#include "depulse/ar_model.hpp"

#include <cmath>
#include <iostream>
#include <vector>

#include "depulse/errors.hpp"

namespace depulse {

ArModel estimate_ar_covariance(std::span<const double> samples, int order) {
    const auto len = static_cast<int>(samples.size());
    if (order < 1) throw DimensionError("AR order must be >= 1");
    if (len < 2 * order + 1)
        throw DimensionError("need at least 2P+1 samples to fit AR(P), got " +
                             std::to_string(len));

    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(order, order);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(order);
    for (int n = order; n < len; ++n) {
        for (int i = 1; i <= order; ++i) {
            rhs(i - 1) += samples[n] * samples[n - i];
            for (int j = i; j <= order; ++j)
                normal(i - 1, j - 1) += samples[n - i] * samples[n - j];
        }
    }
    normal = normal.selfadjointView<Eigen::Upper>();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (lmax <= 0.0) throw DegenerateSignalError("AR fit: normal equations are all zero");
    if (lmin <= 0.0 || lmax / lmin > 1e12) {
        const double ridge = 1e-9 * normal.trace() / order;
        std::cerr << "depulse: AR normal equations ill-conditioned, adding ridge " << ridge
                  << "\n";
        normal.diagonal().array() += ridge;
    }

    ArModel model;
    model.a = normal.ldlt().solve(rhs);
    if (!model.a.allFinite()) throw DegenerateSignalError("AR fit: solve produced non-finite coefficients");

    double sse = 0.0;
    for (int n = order; n < len; ++n) {
        double pred = 0.0;
        for (int i = 1; i <= order; ++i) pred += model.a(i - 1) * samples[n - i];
        const double r = samples[n] - pred;
        sse += r * r;
    }
    model.sigma_e2 = sse / static_cast<double>(len - order);
    return model;
}

void SegmentPartition::validate() const {
    if (n0 < 0 || m < 0 || n <= 0 || n0 + m > n)
        throw PartitionError("invalid partition (n0=" + std::to_string(n0) +
                             ", M=" + std::to_string(m) + ", N=" + std::to_string(n) + ")");
}

Eigen::SparseMatrix<double> build_prediction_matrix(const ArModel& model, int n) {
    const int p = model.order();
    if (n <= p) throw DimensionError("block length must exceed AR order");
    Eigen::SparseMatrix<double> mat(n - p, n);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n - p) * (p + 1));
    for (int r = 0; r < n - p; ++r) {
        for (int j = 0; j < p; ++j) {
            const double v = -model.a(p - 1 - j);
            if (v != 0.0) trip.emplace_back(r, r + j, v);
        }
        trip.emplace_back(r, r + p, 1.0);
    }
    mat.setFromTriplets(trip.begin(), trip.end());
    return mat;
}

PartitionedPredictor partition_predictor(const Eigen::SparseMatrix<double>& full,
                                         const SegmentPartition& part, int order) {
    part.validate();
    if (full.cols() != part.n || full.rows() != part.n - order)
        throw PartitionError("prediction matrix shape does not match partition");

    PartitionedPredictor pp;
    pp.part = part;
    pp.order = order;
    pp.a0 = full.middleCols(0, part.n0);
    pp.a1 = full.middleCols(part.n0, part.m);

    // Tail columns keep only the unit entry at row c - P.
    const int n2 = part.n2();
    pp.a2.resize(full.rows(), n2);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n2));
    for (int k = 0; k < n2; ++k) {
        const int c = part.i2_start() + k;
        if (c >= order) trip.emplace_back(c - order, k, 1.0);
    }
    pp.a2.setFromTriplets(trip.begin(), trip.end());
    return pp;
}

PartitionedPredictor build_partitioned_predictor(const ArModel& model,
                                                 const SegmentPartition& part) {
    return partition_predictor(build_prediction_matrix(model, part.n), part, model.order());
}

}  // namespace depulse
