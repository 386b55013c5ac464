#include "depulse/pulse_models.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <iostream>
#include <limits>

#include "depulse/errors.hpp"

namespace depulse {

void ShapeTailParams::validate() const {
    if (!(tau_m > 0.0) || !(tau_f > 0.0) || !(f_max > 0.0) || !(f_min > 0.0))
        throw NumericError("shape tail: tau_m, tau_f, f_max, f_min must be positive");
    if (f_max < f_min) std::cerr << "depulse: shape tail has f_max < f_min\n";
}

Eigen::VectorXd synth_shape_tail_from(const ShapeTailParams& params, int start_offset,
                                      int tail_len, int sample_rate_hz) {
    if (tail_len < 0) throw DimensionError("tail length must be non-negative");
    if (sample_rate_hz <= 0) throw DimensionError("sample rate must be positive");
    if (tail_len > 0) params.validate();
    const double fs = sample_rate_hz;
    Eigen::VectorXd v(tail_len);
    for (int k = 0; k < tail_len; ++k) {
        const double m = start_offset + k;
        const double fm = (params.f_max - params.f_min) * std::exp(-m / (fs * params.tau_f)) +
                          params.f_min;
        v(k) = params.v_t * std::exp(-m / (fs * params.tau_m)) *
               std::sin(2.0 * M_PI * m * fm / fs + params.phi);
    }
    return v;
}

Eigen::VectorXd synth_shape_tail(const ShapeTailParams& params, int tail_len,
                                 int sample_rate_hz) {
    return synth_shape_tail_from(params, 0, tail_len, sample_rate_hz);
}

Eigen::MatrixXd gram_matrix(int n_points, const GpHyper& h, double jitter) {
    if (n_points < 1) throw DimensionError("gram matrix needs at least one point");
    if (jitter < 0.0) throw NumericError("jitter must be non-negative");
    Eigen::MatrixXd c(n_points, n_points);
    for (int j = 0; j < n_points; ++j)
        for (int i = 0; i < n_points; ++i) c(i, j) = se_kernel(i - j, h);
    c.diagonal().array() += jitter;
    return c;
}

namespace {

struct Evidence {
    double value = -std::numeric_limits<double>::infinity();
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    bool ok = false;
};

// Log marginal likelihood and its gradient w.r.t. log(sigma_f2, sigma_l2,
// sigma_n2), over points t with values y.
Evidence evaluate_evidence(const Eigen::VectorXd& t, const Eigen::VectorXd& y,
                           const Eigen::Vector3d& log_theta, bool want_grad) {
    Evidence ev;
    const double sf2 = std::exp(log_theta(0));
    const double sl2 = std::exp(log_theta(1));
    const double sn2 = std::exp(log_theta(2));
    const auto n = static_cast<int>(t.size());

    Eigen::MatrixXd kse(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double d = t(i) - t(j);
            kse(i, j) = sf2 * std::exp(-d * d / (2.0 * sl2));
        }
    Eigen::MatrixXd ky = kse;
    ky.diagonal().array() += sn2 + 1e-8 * sf2;

    Eigen::LLT<Eigen::MatrixXd> llt(ky);
    if (llt.info() != Eigen::Success) return ev;

    const Eigen::VectorXd alpha = llt.solve(y);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    ev.value = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);
    ev.ok = std::isfinite(ev.value);
    if (!ev.ok || !want_grad) return ev;

    // d/dtheta_j logL = 0.5 tr((alpha alpha^T - Ky^-1) dKy/dtheta_j)
    const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

    Eigen::MatrixXd dl(n, n);  // dKy/dlog sl2 = kse .* d^2/(2 sl2)
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double d = t(i) - t(j);
            dl(i, j) = kse(i, j) * d * d / (2.0 * sl2);
        }
    ev.grad(0) = 0.5 * w.cwiseProduct(kse).sum();
    ev.grad(1) = 0.5 * w.cwiseProduct(dl).sum();
    ev.grad(2) = 0.5 * sn2 * w.trace();
    return ev;
}

Eigen::Vector3d clamp_log_theta(Eigen::Vector3d lt, double scale) {
    const double lo = std::log(scale) - 30.0;
    const double hi = std::log(scale) + 18.0;
    lt(0) = std::clamp(lt(0), lo, hi);
    lt(2) = std::clamp(lt(2), lo, hi);
    lt(1) = std::clamp(lt(1), std::log(1.0), std::log(1e8));
    return lt;
}

}  // namespace

GpTail fit_gp_hyperparams(std::span<const double> y2_init, const GpFitOptions& opts) {
    const auto n_full = static_cast<int>(y2_init.size());
    if (n_full < 16) throw DimensionError("GP fit needs at least 16 samples");

    double mean_sq = 0.0;
    for (double v : y2_init) mean_sq += v * v;
    mean_sq /= n_full;
    if (mean_sq <= 0.0) throw DegenerateFitError("GP fit: input is identically zero");

    // Strided subset keeps the fit O(max_points^3); distances stay in
    // original sample units so sigma_l2 is unaffected by the striding.
    const int stride = (n_full + opts.max_points - 1) / opts.max_points;
    const int n = (n_full + stride - 1) / stride;
    Eigen::VectorXd t(n), y(n);
    for (int k = 0; k < n; ++k) {
        t(k) = static_cast<double>(k * stride);
        y(k) = y2_init[static_cast<std::size_t>(k) * stride];
    }

    const double sl_inits[] = {16.0, 64.0, 256.0, 1024.0};
    Eigen::Vector3d best_theta;
    double best_value = -std::numeric_limits<double>::infinity();
    double initial_value = -std::numeric_limits<double>::infinity();

    for (double sl : sl_inits) {
        Eigen::Vector3d lt(std::log(mean_sq), std::log(sl * sl), std::log(0.25 * mean_sq));
        lt = clamp_log_theta(lt, mean_sq);
        Evidence cur = evaluate_evidence(t, y, lt, true);
        if (!cur.ok) continue;
        initial_value = std::max(initial_value, cur.value);

        double step = 0.5;
        for (int it = 0; it < opts.max_iterations; ++it) {
            const double gnorm = cur.grad.norm();
            if (gnorm < 1e-12) break;
            const Eigen::Vector3d dir = cur.grad / gnorm;
            bool improved = false;
            for (int bt = 0; bt < 20; ++bt) {
                const Eigen::Vector3d trial = clamp_log_theta(lt + step * dir, mean_sq);
                const Evidence ev = evaluate_evidence(t, y, trial, false);
                if (ev.ok && ev.value > cur.value) {
                    const double rel = (ev.value - cur.value) /
                                       (std::abs(cur.value) + 1e-12);
                    lt = trial;
                    cur = evaluate_evidence(t, y, lt, true);
                    step = std::min(step * 1.5, 4.0);
                    improved = true;
                    if (rel < opts.rel_tolerance) it = opts.max_iterations;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) break;
        }
        if (cur.ok && cur.value > best_value) {
            best_value = cur.value;
            best_theta = lt;
        }
    }

    if (!std::isfinite(best_value))
        throw DegenerateFitError("GP fit: no hyperparameter start produced a finite evidence");
    if (best_value < initial_value)
        throw DegenerateFitError("GP fit: ascent ended below its starting point");

    GpTail tail;
    tail.hyper.sigma_f2 = std::exp(best_theta(0));
    tail.hyper.sigma_l2 = std::exp(best_theta(1));
    tail.hyper.sigma_n2 = std::exp(best_theta(2));

    // Posterior mean on the full grid from the strided regression.
    Eigen::MatrixXd ky(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) ky(i, j) = se_kernel(t(i) - t(j), tail.hyper);
    ky.diagonal().array() += tail.hyper.sigma_n2 + 1e-8 * tail.hyper.sigma_f2;
    Eigen::LLT<Eigen::MatrixXd> llt(ky);
    if (llt.info() != Eigen::Success)
        throw DegenerateFitError("GP fit: kernel matrix not positive definite at the optimum");
    const Eigen::VectorXd alpha = llt.solve(y);

    tail.v_t.resize(n_full);
    for (int i = 0; i < n_full; ++i) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += se_kernel(i - t(k), tail.hyper) * alpha(k);
        tail.v_t(i) = acc;
    }
    return tail;
}

}  // namespace depulse
