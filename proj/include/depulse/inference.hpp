#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "depulse/ar_model.hpp"

namespace depulse {

struct GaussianParams {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

// Location and strength of the initial discontinuity.
struct DiscontinuityParams {
    int n0 = 0;
    int m = 1;
    double sigma_d2 = 1.0;
};

// Cholesky factorization with escalating diagonal jitter
// (none, 1e-10*trace/n, 1e-6*trace/n); throws NumericError if all fail.
Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd m);

// Product of two Gaussian densities, renormalized:
// Sigma = (S1^-1 + S2^-1)^-1, mu = Sigma (S1^-1 mu1 + S2^-1 mu2).
GaussianParams gaussian_product_params(const GaussianParams& g1, const GaussianParams& g2);

// log of I = integral exp(-(a + b'z + z'Cz)/2) dz over R^D:
//   log I = (D/2) log 2pi - (1/2) log det C - (1/2)(a - b'C^-1 b / 4).
double quadratic_exp_integral_log(double a, const Eigen::VectorXd& b, const Eigen::MatrixXd& c);

// Which algebraic form of the marginal likelihood to evaluate. kDerived is
// the Gaussian-integral result (lambda^(M/2), det(Phi)^(1/2), and the
// completed-square E_min); kAsPrinted reproduces the unrooted normalizer
// and the alternate E_min for audit comparisons.
enum class LikelihoodForm { kDerived, kAsPrinted };

// log p(y | tail, discontinuity, AR): x1 integrated out analytically.
// v_t must cover i2. With the derived form,
//   log p = (M/2) log lambda - ((N-P)/2) log(2 pi sigma_e2)
//           - (1/2) log det Phi - E_min / (2 sigma_e2),
//   Phi = lambda I + A1'A1, Theta = lambda y1 - A1'[A0 A2]z,
//   E_min = lambda y1'y1 + z'[A0 A2]'[A0 A2]z - Theta' Phi^-1 Theta.
double marginal_loglik_full(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                            const Eigen::VectorXd& y2, const PartitionedPredictor& pp,
                            double sigma_d2, const Eigen::VectorXd& v_t, double sigma_e2,
                            LikelihoodForm form = LikelihoodForm::kDerived);

// lambda -> 0 limit, up to an additive constant: -(1/2) z'Rz with
// R = (1/sigma_e2) [A0 A2]' S [A0 A2], S = I - A1(A1'A1)^-1 A1'.
double marginal_loglik_simplified(const Eigen::VectorXd& y0, const Eigen::VectorXd& y2,
                                  const PartitionedPredictor& pp, double sigma_e2,
                                  const Eigen::VectorXd& v_t);

// Posterior of the destroyed samples: N(Phi^-1 Theta, sigma_e2 Phi^-1).
GaussianParams x1_posterior(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                            const Eigen::VectorXd& y2, const PartitionedPredictor& pp,
                            double sigma_d2, const Eigen::VectorXd& v_t, double sigma_e2);

// Dense S projector (test/diagnostic scale; (N-P)^2 storage).
Eigen::MatrixXd projector_s_dense(const PartitionedPredictor& pp);

struct RBlocks {
    Eigen::MatrixXd r11, r12, r21, r22;  // blocks of R over (y0 | y2 - v_t)
};

RBlocks build_r_blocks_dense(const PartitionedPredictor& pp, double sigma_e2);

// Tail posterior under the GP prior N(0, C):
//   mean = [R22 + R22' + C^-1 + C^-T]^-1 [(R12' + R21) y0 + (R22' + R22) y2]
//   cov  = [ (R22 + R22' + C^-1 + C^-T)/2 ]^-1
// with C^-1 + C^-T collapsed to 2 C^-1 (C is symmetric).
GaussianParams gp_tail_posterior(const RBlocks& r, const Eigen::MatrixXd& c,
                                 const Eigen::VectorXd& y0, const Eigen::VectorXd& y2);

// Conditional of the tail amplitude when the tail is v_t = t * g for a unit
// shape g: completing the square in t under the marginal likelihood gives a
// Gaussian (flat prior on t over the reals).
struct ScalarGaussian {
    double mean = 0.0;
    double variance = 0.0;
};

ScalarGaussian vt_conditional_moments(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                                      const Eigen::VectorXd& y2, const Eigen::VectorXd& g,
                                      const PartitionedPredictor& pp, double sigma_d2,
                                      double sigma_e2);

struct InvGammaParams {
    double alpha = 0.0;
    double beta = 0.0;
};

// Conjugate update for the discontinuity variance given v_d = y1 - x1:
// alpha = alpha_d + M/2, beta = beta_d + sum(v_d^2)/2.
InvGammaParams sigma_d2_posterior_params(const Eigen::VectorXd& v_d, double alpha_d,
                                         double beta_d);

}  // namespace depulse
