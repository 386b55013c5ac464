#pragma once

#include <Eigen/Dense>
#include <span>

namespace depulse {

// Parametric tail: exponentially decaying envelope around a sinusoid whose
// frequency glides from f_max down to f_min. Time constants are in seconds,
// frequencies in Hz, phi in radians.
struct ShapeTailParams {
    double v_t = 0.0;
    double tau_m = 0.0;
    double tau_f = 0.0;
    double f_max = 0.0;
    double f_min = 0.0;
    double phi = 0.0;

    // Throws on non-positive time constants/frequencies; warns (stderr only)
    // when f_max < f_min.
    void validate() const;
};

// Tail offset m is measured from the first tail sample, so the envelope
// starts at v_t wherever the pulse sits inside the block:
//   v(m) = v_t * exp(-m/(fs*tau_m)) * sin(2*pi*m*f_m/fs + phi)
//   f_m  = (f_max - f_min) * exp(-m/(fs*tau_f)) + f_min
Eigen::VectorXd synth_shape_tail(const ShapeTailParams& params, int tail_len, int sample_rate_hz);

// Same template evaluated over m = start_offset .. start_offset+tail_len-1.
// Negative offsets extend the template backwards continuously; the sampler
// uses this to keep the tail anchored to a fixed time reference while the
// partition boundary moves, so that boundary moves cut the template instead
// of sliding it.
Eigen::VectorXd synth_shape_tail_from(const ShapeTailParams& params, int start_offset,
                                      int tail_len, int sample_rate_hz);

// Squared-exponential kernel hyperparameters. sigma_l2 is the squared
// length-scale in samples^2. sigma_n2 is the observation-noise variance and
// is only meaningful during the maximum-likelihood fit.
struct GpHyper {
    double sigma_f2 = 1.0;
    double sigma_l2 = 1.0;
    double sigma_n2 = 1.0;
};

inline double se_kernel(double dt, const GpHyper& h) {
    return h.sigma_f2 * std::exp(-dt * dt / (2.0 * h.sigma_l2));
}

// Gram matrix over n equally spaced points (spacing 1 sample), plus
// jitter on the diagonal.
Eigen::MatrixXd gram_matrix(int n_points, const GpHyper& h, double jitter);

// Non-parametric tail state: the tail sample values plus the (frozen)
// kernel hyperparameters they were estimated under.
struct GpTail {
    Eigen::VectorXd v_t;
    GpHyper hyper;
};

struct GpFitOptions {
    int max_points = 512;      // fit on at most this many (strided) samples
    int max_iterations = 60;   // gradient-ascent iterations per start
    double rel_tolerance = 1e-6;
};

// Fits (sigma_f2, sigma_l2, sigma_n2) by maximizing the evidence of
// y = f + eps, f ~ GP(0, K_SE), eps white. Multi-start ascent over four
// log-spaced length-scales; returns the GP posterior mean over the full
// input grid as the initial tail estimate. Throws DegenerateFitError when
// the input carries no signal or no start converges.
GpTail fit_gp_hyperparams(std::span<const double> y2_init, const GpFitOptions& opts = {});

}  // namespace depulse
