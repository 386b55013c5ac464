#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "depulse/ar_model.hpp"
#include "depulse/inference.hpp"
#include "depulse/pulse_models.hpp"
#include "depulse/rng.hpp"

namespace depulse {

enum class TailModelKind { kShape, kGp };

// Index order of the shape parameters that move by Metropolis-Hastings.
enum ShapeParamIndex { kTauM = 0, kTauF, kFMax, kFMin, kPhi, kShapeParamCount };

struct SamplerConfig {
    int iterations = 200;
    int burn_in = 150;
    int thin = 1;
    // Total support length of the discrete uniform proposal for n0 and M;
    // width w proposes offsets in [-w/2, w/2 - 1] (current value reachable).
    int loc_proposal_width = 10;
    // Proposal variances for (tau_m, tau_f, f_max, f_min, phi).
    std::array<double, kShapeParamCount> shape_proposal_vars = {1.5e-5, 5e-7, 6.0, 0.6, 1e-2};
    // Default is one Metropolis-Hastings update per shape parameter per
    // sweep; true proposes all five jointly with a single accept/reject.
    bool shape_block_proposal = false;
    // Reproduces the unrooted lambda^M / det(Phi) normalization of the
    // published marginal likelihood in the location target. The extra
    // per-sample weight pins the gap boundaries the way the published
    // chains behave; switching it off uses the Gaussian-integral
    // normalization, under which the quiet start of a tail and the gap are
    // nearly exchangeable and the M posterior spreads accordingly.
    bool paper_normalization = true;
    uint64_t seed = 0;
    double alpha_d = 1e-4;  // Inverse-Gamma prior shape for sigma_d2
    double beta_d = 1e-4;   // Inverse-Gamma prior scale for sigma_d2

    void validate() const;  // throws ConfigError
};

// Marginal-likelihood evaluator over one excerpt, specialized for the
// banded structure: rows before the discontinuity reduce to plain AR
// residuals of y (prefix-summed once), rows under the tail reduce to the
// tail samples themselves, and only an O(P)-row window around the
// discontinuity needs real work. Equivalent to the sparse-matrix route
// through marginal_loglik_full; the unit tests pin that equivalence.
//
// tail_var is the innovation variance of the degenerate order-zero model
// under the tail (the signal's own variance, fitted like any AR model).
// Passing 0 reuses sigma_e2 for the tail rows, which reproduces the
// single-variance algebra of marginal_loglik_full exactly but makes the
// (n0, M) posterior collapse onto swallowing the whole tail whenever the
// AR fit predicts much better than the raw signal variance.
class BlockLikelihood {
public:
    BlockLikelihood(Eigen::VectorXd y, ArModel ar, double tail_var = 0.0);

    int block_len() const { return static_cast<int>(y_.size()); }
    int order() const { return ar_.order(); }
    const Eigen::VectorXd& y() const { return y_; }
    const ArModel& ar() const { return ar_; }
    double tail_var() const { return tail_var_; }

    Eigen::VectorXd y0(const SegmentPartition& part) const { return y_.head(part.n0); }
    Eigen::VectorXd y1(const SegmentPartition& part) const { return y_.segment(part.n0, part.m); }
    Eigen::VectorXd y2(const SegmentPartition& part) const { return y_.tail(part.n2()); }

    double loglik(const SegmentPartition& part, const Eigen::VectorXd& v_t, double sigma_d2,
                  bool paper_normalization = false) const;

    // Posterior of the destroyed samples for the current partition.
    GaussianParams x1_posterior(const SegmentPartition& part, const Eigen::VectorXd& v_t,
                                double sigma_d2) const;

    // Gaussian conditional of the tail amplitude for unit shape g.
    ScalarGaussian vt_conditional(const SegmentPartition& part, const Eigen::VectorXd& g,
                                  double sigma_d2) const;

private:
    // Everything is row-weighted: rows whose unit entry falls under the
    // tail carry 1/tail_var, the rest 1/sigma_e2.
    struct Workspace {
        Eigen::VectorXd u_win;   // rows [win_start, win_end)
        Eigen::VectorXd w_win;   // per-row inverse variances, same rows
        Eigen::MatrixXd a1_win;  // same rows x M
        int win_start = 0, win_end = 0;
        double quad = 0.0;  // sum over all rows of u(r)^2 / var(r)
        Eigen::LLT<Eigen::MatrixXd> phi_chol;  // A1' D^-1 A1 + I/sigma_d2
        Eigen::VectorXd theta;                 // y1/sigma_d2 - A1' D^-1 u
        double log_det_phi = 0.0;
    };
    Workspace assemble(const SegmentPartition& part, const Eigen::VectorXd& v_t,
                       double sigma_d2) const;
    void fill_a1_window(const SegmentPartition& part, int win_start, int win_end,
                        Eigen::MatrixXd& a1) const;
    void check(const SegmentPartition& part, const Eigen::VectorXd& v_t) const;

    Eigen::VectorXd y_;
    ArModel ar_;
    double tail_var_ = 0.0;
    Eigen::VectorXd res_full_;    // AR residual of y at every row
    Eigen::VectorXd prefix_sq_;   // prefix sums of res_full^2

    friend class GpTailSolver;
};

// Tail posterior mean under the GP prior, reorganized for long tails: with
// the order-zero switch A2 is a unit-column selection, so the posterior
// precision is C^-1 + (I - W G^-1 W')/sigma_e2 with an M-rank correction
// supported on the first P tail rows. One Cholesky of (C + sigma_e2 I) at
// the maximum tail length serves every shorter tail (leading principal
// submatrix of an SPD factorization), leaving M+1 triangular solves per
// distinct (n0, M).
class GpTailSolver {
public:
    GpTailSolver(const BlockLikelihood* lik, GpHyper hyper);

    const Eigen::VectorXd& mean(const SegmentPartition& part);
    const GpHyper& hyper() const { return hyper_; }

private:
    void ensure_factor(int n2);
    Eigen::VectorXd solve_kernel(const Eigen::VectorXd& rhs) const;  // (C + se2 I)^-1 rhs
    Eigen::VectorXd apply_h0_inverse(const Eigen::VectorXd& x) const;
    Eigen::VectorXd compute(const SegmentPartition& part);

    const BlockLikelihood* lik_;
    GpHyper hyper_;
    Eigen::MatrixXd chol_;  // lower factor of C + sigma_e2 I at size factored_
    int factored_ = 0;
    int cached_n0_ = -1, cached_m_ = -1;
    Eigen::VectorXd cached_mean_;
};

struct ChainState {
    int n0 = 0;
    int m = 1;
    double sigma_d2 = 1.0;
    ShapeTailParams shape;  // meaningful for the shape model
    Eigen::VectorXd v_t;    // tail values over i2 (both models)
    Eigen::VectorXd x1;
    bool loc_accepted = false;
    std::array<uint8_t, kShapeParamCount> shape_accepted{};
    std::array<uint8_t, kShapeParamCount> shape_proposed{};
};

struct Chain {
    std::vector<ChainState> states;
    TailModelKind kind = TailModelKind::kGp;
    SamplerConfig config;

    double loc_acceptance_rate(int from_iteration = 0) const;
    // Acceptance rate of one shape parameter (sequential mode) or of the
    // joint block (every index reports the same number in block mode).
    double shape_acceptance_rate(int param, int from_iteration = 0) const;
};

struct ParamSummary {
    double mean = 0.0;
    double lo = 0.0;  // empirical 2.5% quantile
    double hi = 0.0;  // empirical 97.5% quantile
};

struct PosteriorEstimate {
    ParamSummary n0, m, sigma_d2;
    std::optional<std::array<ParamSummary, 6>> shape;  // V_t, tau_m, tau_f, f_max, f_min, phi
    int modal_n0 = 0;  // most frequent retained partition
    int modal_m = 0;
    Eigen::VectorXd v_t;  // elementwise means over retained states at the modal partition
    Eigen::VectorXd x1;
    int retained = 0;
};

// Everything fixed before the chain starts: the excerpt, the pre-fit AR
// model, the tail model kind and its initialization, and the prior.
struct GibbsProblem {
    Eigen::VectorXd y;
    int sample_rate_hz = 44100;
    ArModel ar;
    TailModelKind kind = TailModelKind::kGp;
    int n0_init = 0;
    int m_init = 1;
    double sigma_d2_init = 1.0;
    ShapeTailParams shape_init{0.1, 0.1, 0.19, 50.0, 30.0, 0.5};
    // Refine shape_init by a coarse likelihood grid before the chain starts;
    // stands in for the by-eye starting point the shape model otherwise
    // needs from the user.
    bool shape_coarse_init = true;
    GpTail gp_init;      // required for kGp (frozen hyperparameters + tail)
    int min_n0 = 450;    // location proposals keep n0 >= this pre-context
    double tail_var = 0.0;  // order-zero model variance; 0 reuses ar.sigma_e2
    // Block-time reference the shape template is anchored to. The default
    // (-1) anchors at the current tail onset, so the template slides with
    // the partition; any fixed index >= 0 pins it to block time, making
    // location moves cut the template instead of sliding it.
    int tail_anchor = -1;
};

// Best-of-grid starting point for the shape tail: scans glide constants,
// onset/floor frequencies and phases around the supplied base, taking the
// amplitude from its exact Gaussian conditional at every candidate.
ShapeTailParams shape_tail_coarse_init(const BlockLikelihood& lik, const SegmentPartition& part,
                                       double sigma_d2, int sample_rate_hz,
                                       const ShapeTailParams& base);

class GibbsSampler {
public:
    GibbsSampler(GibbsProblem problem, SamplerConfig config);

    // One sweep: (i) location, (ii) tail + x1, (iii) sigma_d2.
    void sweep(Rng& rng);
    Chain run();  // config.iterations sweeps from Rng(config.seed)

    // Individual steps, exposed for targeted tests and diagnostics.
    bool location_step(Rng& rng);
    std::array<uint8_t, kShapeParamCount> shape_params_step(Rng& rng);
    void vt_amplitude_step(Rng& rng);
    void gp_tail_step();
    void x1_step(Rng& rng);
    double sigma_d2_step(Rng& rng);

    const ChainState& state() const { return state_; }
    const BlockLikelihood& likelihood() const { return lik_; }
    SegmentPartition partition() const;
    // Log target at the current state; recomputed, never cached.
    double current_loglik() const;

    // Test hook: replaces the location-step target with an arbitrary
    // function of (n0, M) so proposal mechanics can be checked in isolation.
    void set_location_target_override(std::function<double(int, int)> f) {
        loc_target_override_ = std::move(f);
    }

private:
    Eigen::VectorXd tail_for(const SegmentPartition& part) const;  // current tail, re-indexed
    Eigen::VectorXd shape_template(const ShapeTailParams& params,
                                   const SegmentPartition& part) const;

    GibbsProblem problem_;
    SamplerConfig config_;
    BlockLikelihood lik_;
    std::optional<GpTailSolver> gp_solver_;
    ChainState state_;
    std::function<double(int, int)> loc_target_override_;
};

Chain run_gibbs(const GibbsProblem& problem, const SamplerConfig& config);

// Posterior means and 2.5/97.5% empirical quantiles over the retained
// (post burn-in, thinned) states. x1 and v_t are averaged over the retained
// states holding the modal (n0, M).
PosteriorEstimate chain_estimate(const Chain& chain, int burn_in, int thin);

// Linear-interpolation empirical quantile of an unsorted sample.
double empirical_quantile(std::vector<double> values, double q);

}  // namespace depulse
