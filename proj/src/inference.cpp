#include "depulse/inference.hpp"

#include <cmath>

#include "depulse/errors.hpp"

namespace depulse {
namespace {

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double ld = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) ld += 2.0 * std::log(l(i, i));
    return ld;
}

// Shared pieces of the x1 marginalization.
struct PhiTheta {
    Eigen::LLT<Eigen::MatrixXd> phi_chol;
    Eigen::VectorXd theta;
    Eigen::VectorXd u;  // [A0 A2] z
    double lambda = 0.0;
    double log_det_phi = 0.0;
};

void check_parts(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, const Eigen::VectorXd& y2,
                 const PartitionedPredictor& pp, const Eigen::VectorXd& v_t) {
    if (y0.size() != pp.part.n0 || y1.size() != pp.part.m || y2.size() != pp.part.n2())
        throw DimensionError("y parts do not match the partition");
    if (v_t.size() != pp.part.n2()) throw DimensionError("v_t length must equal |i2|");
}

PhiTheta compute_phi_theta(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                           const Eigen::VectorXd& y2, const PartitionedPredictor& pp,
                           double sigma_d2, const Eigen::VectorXd& v_t, double sigma_e2) {
    check_parts(y0, y1, y2, pp, v_t);
    if (!(sigma_e2 > 0.0) || !(sigma_d2 > 0.0))
        throw NumericError("variances must be positive");

    PhiTheta pt;
    pt.lambda = sigma_e2 / sigma_d2;
    pt.u = pp.a0 * y0 + pp.a2 * (y2 - v_t);

    const int m = pp.part.m;
    if (m > 0) {
        Eigen::MatrixXd phi = Eigen::MatrixXd(pp.a1.transpose() * pp.a1);
        phi.diagonal().array() += pt.lambda;
        pt.phi_chol = chol_with_jitter(std::move(phi));
        pt.log_det_phi = log_det_from_llt(pt.phi_chol);
        pt.theta = pt.lambda * y1 - Eigen::VectorXd(pp.a1.transpose() * pt.u);
    }
    return pt;
}

}  // namespace

Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd m) {
    if (m.rows() != m.cols()) throw DimensionError("cholesky needs a square matrix");
    const double base = m.trace() / std::max<Eigen::Index>(m.rows(), 1);
    const double jitters[] = {0.0, 1e-10 * base, 1e-6 * base};
    double applied = 0.0;
    for (double j : jitters) {
        m.diagonal().array() += j - applied;
        applied = j;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericError("matrix not positive definite after jitter escalation");
}

GaussianParams gaussian_product_params(const GaussianParams& g1, const GaussianParams& g2) {
    if (g1.mean.size() != g2.mean.size()) throw DimensionError("gaussian product: dimension mismatch");
    const auto d = g1.mean.size();
    Eigen::LLT<Eigen::MatrixXd> l1(g1.covariance), l2(g2.covariance);
    if (l1.info() != Eigen::Success || l2.info() != Eigen::Success)
        throw NumericError("gaussian product: singular covariance");
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd p1 = l1.solve(id);
    const Eigen::MatrixXd p2 = l2.solve(id);
    Eigen::LLT<Eigen::MatrixXd> lp(p1 + p2);
    if (lp.info() != Eigen::Success) throw NumericError("gaussian product: precision sum not PD");
    GaussianParams out;
    out.covariance = lp.solve(id);
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    out.mean = lp.solve(p1 * g1.mean + p2 * g2.mean);
    return out;
}

double quadratic_exp_integral_log(double a, const Eigen::VectorXd& b, const Eigen::MatrixXd& c) {
    if (c.rows() != c.cols() || c.rows() != b.size())
        throw DimensionError("quadratic integral: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) throw NumericError("quadratic integral: C not PD");
    const double d = static_cast<double>(b.size());
    const double quad = b.dot(llt.solve(b));
    return 0.5 * d * std::log(2.0 * M_PI) - 0.5 * log_det_from_llt(llt) -
           0.5 * (a - quad / 4.0);
}

double marginal_loglik_full(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                            const Eigen::VectorXd& y2, const PartitionedPredictor& pp,
                            double sigma_d2, const Eigen::VectorXd& v_t, double sigma_e2,
                            LikelihoodForm form) {
    const PhiTheta pt = compute_phi_theta(y0, y1, y2, pp, sigma_d2, v_t, sigma_e2);
    const int m = pp.part.m;
    const double rows = pp.rows();
    const double uu = pt.u.squaredNorm();

    if (m == 0)
        return -0.5 * rows * std::log(2.0 * M_PI * sigma_e2) - uu / (2.0 * sigma_e2);

    const Eigen::VectorXd x1_map = pt.phi_chol.solve(pt.theta);
    if (form == LikelihoodForm::kDerived) {
        const double e_min = pt.lambda * y1.squaredNorm() + uu - pt.theta.dot(x1_map);
        return 0.5 * m * std::log(pt.lambda) - 0.5 * rows * std::log(2.0 * M_PI * sigma_e2) -
               0.5 * pt.log_det_phi - e_min / (2.0 * sigma_e2);
    }
    const double e_min = pt.lambda * pt.lambda * y1.squaredNorm() + uu + x1_map.dot(pt.theta);
    return m * std::log(pt.lambda) - 0.5 * rows * std::log(2.0 * M_PI * sigma_e2) -
           pt.log_det_phi - e_min / (2.0 * sigma_e2);
}

double marginal_loglik_simplified(const Eigen::VectorXd& y0, const Eigen::VectorXd& y2,
                                  const PartitionedPredictor& pp, double sigma_e2,
                                  const Eigen::VectorXd& v_t) {
    if (y0.size() != pp.part.n0 || y2.size() != pp.part.n2() || v_t.size() != pp.part.n2())
        throw DimensionError("y parts do not match the partition");
    if (!(sigma_e2 > 0.0)) throw NumericError("sigma_e2 must be positive");

    const Eigen::VectorXd u = pp.a0 * y0 + pp.a2 * (y2 - v_t);
    double quad = u.squaredNorm();
    if (pp.part.m > 0) {
        Eigen::MatrixXd g1 = Eigen::MatrixXd(pp.a1.transpose() * pp.a1);
        Eigen::LLT<Eigen::MatrixXd> llt(g1);
        if (llt.info() != Eigen::Success)
            throw NumericError("simplified likelihood: A1'A1 singular");
        const Eigen::VectorXd a1u = pp.a1.transpose() * u;
        quad -= a1u.dot(llt.solve(a1u));
    }
    return -quad / (2.0 * sigma_e2);
}

GaussianParams x1_posterior(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                            const Eigen::VectorXd& y2, const PartitionedPredictor& pp,
                            double sigma_d2, const Eigen::VectorXd& v_t, double sigma_e2) {
    const PhiTheta pt = compute_phi_theta(y0, y1, y2, pp, sigma_d2, v_t, sigma_e2);
    GaussianParams out;
    if (pp.part.m == 0) return out;
    out.mean = pt.phi_chol.solve(pt.theta);
    out.covariance =
        sigma_e2 * pt.phi_chol.solve(Eigen::MatrixXd::Identity(pp.part.m, pp.part.m));
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    return out;
}

Eigen::MatrixXd projector_s_dense(const PartitionedPredictor& pp) {
    const int rows = pp.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(rows, rows);
    if (pp.part.m == 0) return s;
    const Eigen::MatrixXd a1 = Eigen::MatrixXd(pp.a1);
    Eigen::LLT<Eigen::MatrixXd> llt(a1.transpose() * a1);
    if (llt.info() != Eigen::Success) throw NumericError("projector: A1'A1 singular");
    s.noalias() -= a1 * llt.solve(a1.transpose());
    return s;
}

RBlocks build_r_blocks_dense(const PartitionedPredictor& pp, double sigma_e2) {
    if (!(sigma_e2 > 0.0)) throw NumericError("sigma_e2 must be positive");
    const Eigen::MatrixXd s = projector_s_dense(pp);
    const Eigen::MatrixXd b0 = Eigen::MatrixXd(pp.a0);
    const Eigen::MatrixXd b2 = Eigen::MatrixXd(pp.a2);
    RBlocks r;
    r.r11 = b0.transpose() * s * b0 / sigma_e2;
    r.r12 = b0.transpose() * s * b2 / sigma_e2;
    r.r21 = b2.transpose() * s * b0 / sigma_e2;
    r.r22 = b2.transpose() * s * b2 / sigma_e2;
    return r;
}

GaussianParams gp_tail_posterior(const RBlocks& r, const Eigen::MatrixXd& c,
                                 const Eigen::VectorXd& y0, const Eigen::VectorXd& y2) {
    const auto n2 = r.r22.rows();
    if (r.r22.cols() != n2 || c.rows() != n2 || c.cols() != n2 || y2.size() != n2 ||
        r.r21.rows() != n2 || r.r21.cols() != y0.size() || r.r12.rows() != y0.size() ||
        r.r12.cols() != n2)
        throw DimensionError("gp tail posterior: block dimensions inconsistent");

    const Eigen::MatrixXd c_inv = chol_with_jitter(c).solve(Eigen::MatrixXd::Identity(n2, n2));
    const Eigen::MatrixXd r22_sym = r.r22 + r.r22.transpose();
    // C symmetric, so C^-1 + C^-T = C_inv + C_inv'.
    Eigen::MatrixXd precision = r22_sym + c_inv + c_inv.transpose();
    const Eigen::VectorXd rhs = (r.r12.transpose() + r.r21) * y0 + r22_sym * y2;

    Eigen::LLT<Eigen::MatrixXd> llt = chol_with_jitter(std::move(precision));
    GaussianParams out;
    out.mean = llt.solve(rhs);
    out.covariance = 2.0 * llt.solve(Eigen::MatrixXd::Identity(n2, n2));
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    return out;
}

ScalarGaussian vt_conditional_moments(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                                      const Eigen::VectorXd& y2, const Eigen::VectorXd& g,
                                      const PartitionedPredictor& pp, double sigma_d2,
                                      double sigma_e2) {
    if (g.size() != pp.part.n2()) throw DimensionError("unit tail shape must cover i2");
    if (y0.size() != pp.part.n0 || y1.size() != pp.part.m || y2.size() != pp.part.n2())
        throw DimensionError("y parts do not match the partition");
    if (!(sigma_e2 > 0.0) || !(sigma_d2 > 0.0))
        throw NumericError("variances must be positive");

    const double lambda = sigma_e2 / sigma_d2;
    const Eigen::VectorXd u0 = pp.a0 * y0 + pp.a2 * y2;
    const Eigen::VectorXd u1 = pp.a2 * g;

    double a = u1.squaredNorm();
    double b = u0.dot(u1);
    if (pp.part.m > 0) {
        Eigen::MatrixXd phi = Eigen::MatrixXd(pp.a1.transpose() * pp.a1);
        phi.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt = chol_with_jitter(std::move(phi));
        const Eigen::VectorXd c0 = lambda * y1 - Eigen::VectorXd(pp.a1.transpose() * u0);
        const Eigen::VectorXd c1 = pp.a1.transpose() * u1;
        const Eigen::VectorXd phi_c1 = llt.solve(c1);
        a -= c1.dot(phi_c1);
        b += c0.dot(phi_c1);
    }
    if (!(a > 0.0))
        throw NumericError("tail amplitude conditional is degenerate (zero unit shape?)");
    return {b / a, sigma_e2 / a};
}

InvGammaParams sigma_d2_posterior_params(const Eigen::VectorXd& v_d, double alpha_d,
                                         double beta_d) {
    InvGammaParams p;
    p.alpha = alpha_d + 0.5 * static_cast<double>(v_d.size());
    p.beta = beta_d + 0.5 * v_d.squaredNorm();
    return p;
}

}  // namespace depulse
