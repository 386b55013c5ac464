// Shared fixtures and independent oracles for the test suites. Everything
// here is deliberately written from the raw definitions (difference
// equations, dense Gaussian algebra) rather than through the library's own
// matrix assembly, so agreement is meaningful.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "depulse/ar_model.hpp"
#include "depulse/pipeline.hpp"
#include "depulse/rng.hpp"
#include "depulse/signal.hpp"

namespace test_support {

// Prediction-error matrix built by running the AR difference equation on
// unit vectors: column c is the residual sequence of e_c. Tail columns
// (c >= i2_start) keep only the unit entry, dropping the AR terms.
inline Eigen::MatrixXd dense_predictor_by_recursion(const Eigen::VectorXd& a, int n,
                                                    int i2_start) {
    const int p = static_cast<int>(a.size());
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n - p, n);
    for (int c = 0; c < n; ++c) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(n, c);
        for (int r = 0; r < n - p; ++r) {
            double acc = e(r + p);
            for (int i = 1; i <= p; ++i) acc -= a(i - 1) * e(r + p - i);
            full(r, c) = acc;
        }
        if (c >= i2_start) {
            for (int r = 0; r < n - p; ++r)
                if (r != c - p) full(r, c) = 0.0;
        }
    }
    return full;
}

struct DenseParts {
    Eigen::MatrixXd b0, a1, b2;  // columns of the (modified) predictor by region
};

inline DenseParts split_dense(const Eigen::MatrixXd& full, int n0, int m) {
    DenseParts d;
    d.b0 = full.leftCols(n0);
    d.a1 = full.middleCols(n0, m);
    d.b2 = full.rightCols(full.cols() - n0 - m);
    return d;
}

// Marginal log-likelihood by dense joint-Gaussian algebra: integrate the
// product of the AR prior (evaluated on the pinned block) and the Gaussian
// observation of y1, with no reference to Phi/Theta/E_min.
inline double oracle_marginal_loglik(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                                     const Eigen::VectorXd& y2, const Eigen::VectorXd& a,
                                     int n0, const Eigen::VectorXd& v_t, double sigma_d2,
                                     double sigma_e2) {
    const int p = static_cast<int>(a.size());
    const int m = static_cast<int>(y1.size());
    const int n = n0 + m + static_cast<int>(y2.size());
    const Eigen::MatrixXd full = dense_predictor_by_recursion(a, n, n0 + m);
    const DenseParts d = split_dense(full, n0, m);
    const Eigen::VectorXd bz = d.b0 * y0 + d.b2 * (y2 - v_t);

    const Eigen::MatrixXd q = d.a1.transpose() * d.a1 / sigma_e2 +
                              Eigen::MatrixXd::Identity(m, m) / sigma_d2;
    const Eigen::VectorXd b = -d.a1.transpose() * bz / sigma_e2 + y1 / sigma_d2;
    const double c = bz.squaredNorm() / sigma_e2 + y1.squaredNorm() / sigma_d2;

    const Eigen::LLT<Eigen::MatrixXd> llt(q);
    double logdet_q = 0.0;
    for (int i = 0; i < m; ++i) logdet_q += 2.0 * std::log(llt.matrixLLT()(i, i));

    const double rows = n - p;
    return -0.5 * m * std::log(2.0 * M_PI * sigma_d2) -
           0.5 * rows * std::log(2.0 * M_PI * sigma_e2) + 0.5 * m * std::log(2.0 * M_PI) -
           0.5 * logdet_q - 0.5 * (c - b.dot(llt.solve(b)));
}

// Same marginalization with the order-zero model carrying its own variance:
// rows whose unit entry lands in i2 have noise tail_var, the rest sigma_e2.
inline double oracle_marginal_loglik_weighted(const Eigen::VectorXd& y0,
                                              const Eigen::VectorXd& y1,
                                              const Eigen::VectorXd& y2,
                                              const Eigen::VectorXd& a, int n0,
                                              const Eigen::VectorXd& v_t, double sigma_d2,
                                              double sigma_e2, double tail_var) {
    const int p = static_cast<int>(a.size());
    const int m = static_cast<int>(y1.size());
    const int n = n0 + m + static_cast<int>(y2.size());
    const int rows = n - p;
    const Eigen::MatrixXd full = dense_predictor_by_recursion(a, n, n0 + m);
    const DenseParts d = split_dense(full, n0, m);
    const Eigen::VectorXd bz = d.b0 * y0 + d.b2 * (y2 - v_t);

    Eigen::VectorXd inv_var(rows);
    double logdet_d = 0.0;
    for (int r = 0; r < rows; ++r) {
        const double var = (r + p >= n0 + m) ? tail_var : sigma_e2;
        inv_var(r) = 1.0 / var;
        logdet_d += std::log(var);
    }

    const Eigen::MatrixXd q = d.a1.transpose() * inv_var.asDiagonal() * d.a1 +
                              Eigen::MatrixXd::Identity(m, m) / sigma_d2;
    const Eigen::VectorXd b =
        -d.a1.transpose() * inv_var.cwiseProduct(bz) + y1 / sigma_d2;
    const double c = bz.cwiseAbs2().dot(inv_var) + y1.squaredNorm() / sigma_d2;

    const Eigen::LLT<Eigen::MatrixXd> llt(q);
    double logdet_q = 0.0;
    for (int i = 0; i < m; ++i) logdet_q += 2.0 * std::log(llt.matrixLLT()(i, i));

    return -0.5 * rows * std::log(2.0 * M_PI) - 0.5 * logdet_d -
           0.5 * m * std::log(2.0 * M_PI * sigma_d2) + 0.5 * m * std::log(2.0 * M_PI) -
           0.5 * logdet_q - 0.5 * (c - b.dot(llt.solve(b)));
}

// Conditional mean and covariance of x1 from the same dense construction.
inline void oracle_x1_posterior(const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                                const Eigen::VectorXd& y2, const Eigen::VectorXd& a, int n0,
                                const Eigen::VectorXd& v_t, double sigma_d2, double sigma_e2,
                                Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    const int m = static_cast<int>(y1.size());
    const int n = n0 + m + static_cast<int>(y2.size());
    const Eigen::MatrixXd full = dense_predictor_by_recursion(a, n, n0 + m);
    const DenseParts d = split_dense(full, n0, m);
    const Eigen::VectorXd bz = d.b0 * y0 + d.b2 * (y2 - v_t);

    const Eigen::MatrixXd q = d.a1.transpose() * d.a1 / sigma_e2 +
                              Eigen::MatrixXd::Identity(m, m) / sigma_d2;
    const Eigen::VectorXd b = -d.a1.transpose() * bz / sigma_e2 + y1 / sigma_d2;
    const Eigen::LLT<Eigen::MatrixXd> llt(q);
    mean = llt.solve(b);
    cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
}

// Stable AR coefficients from reflection coefficients via the Levinson
// step-up recursion.
inline Eigen::VectorXd random_stable_ar(depulse::Rng& rng, int p, double max_reflection = 0.9) {
    std::vector<double> cur, prev;
    for (int k = 1; k <= p; ++k) {
        const double refl = (2.0 * rng.uniform() - 1.0) * max_reflection;
        prev = cur;
        cur.assign(k, 0.0);
        cur[k - 1] = refl;
        for (int i = 0; i + 1 < k; ++i) cur[i] = prev[i] - refl * prev[k - 2 - i];
    }
    Eigen::VectorXd a(p);
    for (int i = 0; i < p; ++i) a(i) = cur[i];
    return a;
}

inline Eigen::VectorXd synth_ar_signal(depulse::Rng& rng, const Eigen::VectorXd& a, int n,
                                       double innov_sd, int warmup = 500) {
    const int p = static_cast<int>(a.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n + warmup);
    for (int i = 0; i < n + warmup; ++i) {
        double acc = innov_sd * rng.normal();
        for (int j = 1; j <= p && j <= i; ++j) acc += a(j - 1) * x(i - j);
        x(i) = acc;
    }
    return x.tail(n);
}

// Audio-like test signal, normalized to the requested RMS. Two mid-band
// resonances are first-differenced (music has next to no energy where the
// pulse tails live, below ~100 Hz) and the result is refit as a pure AR(12)
// process, which is then synthesized. Keeping the fixture exactly AR keeps
// it maximally friendly to the restoration model while the spectrum stays
// plausible. hiss_rms adds broadband noise like the surface noise of the
// recordings this method targets.
inline depulse::Signal ar_test_signal(uint64_t seed, int n, double rms = 0.05,
                                      int rate = 44100, double hiss_rms = 0.0) {
    depulse::Rng rng(seed);
    Eigen::VectorXd a(4);
    const double r1 = 0.92, w1 = 2.0 * M_PI * 500.0 / rate;
    const double r2 = 0.88, w2 = 2.0 * M_PI * 1400.0 / rate;
    // (1 - 2 r1 cos w1 z^-1 + r1^2 z^-2)(1 - 2 r2 cos w2 z^-1 + r2^2 z^-2)
    const double b1 = -2.0 * r1 * std::cos(w1), b2 = r1 * r1;
    const double c1 = -2.0 * r2 * std::cos(w2), c2 = r2 * r2;
    a(0) = -(b1 + c1);
    a(1) = -(b2 + c2 + b1 * c1);
    a(2) = -(b1 * c2 + b2 * c1);
    a(3) = -(b2 * c2);

    const int proto_len = 20000;
    const Eigen::VectorXd reso = synth_ar_signal(rng, a, proto_len + 2, 1.0);
    Eigen::VectorXd proto(proto_len);
    for (int i = 0; i < proto_len; ++i)
        proto(i) = (reso(i + 2) - 0.98 * reso(i + 1)) - 0.98 * (reso(i + 1) - 0.98 * reso(i));
    // Tame the differencer's treble boost like real music rolls off.
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < proto_len; ++i) {
        s1 = proto(i) + 0.55 * s1;
        s2 = s1 + 0.55 * s2;
        proto(i) = s2;
    }
    // Order 30 so the refit can hold the low-frequency notch; lower orders
    // fill it back in and leak signal into the band the pulse tails occupy.
    const depulse::ArModel fit = depulse::estimate_ar_covariance(
        {proto.data(), static_cast<size_t>(proto_len)}, 30);

    depulse::Signal s;
    s.sample_rate_hz = rate;
    Eigen::VectorXd x = synth_ar_signal(rng, fit.a, n, 1.0);
    x *= rms / std::sqrt(x.squaredNorm() / n);
    if (hiss_rms > 0.0) {
        // Surface-noise stand-in: first-differenced white noise, so the
        // hiss carries no rumble into the band the pulse tails occupy.
        double prev = rng.normal();
        for (int i = 0; i < n; ++i) {
            const double cur = rng.normal();
            x(i) += hiss_rms * (cur - prev) * M_SQRT1_2;
            prev = cur;
        }
    }
    s.samples.assign(x.data(), x.data() + n);
    return s;
}

// The single-pulse replication fixture: a 3-s hissy AR signal carrying one
// pulse with the canonical true values. The burst noise stream is chosen so
// that both edge samples of the discontinuity are strong; otherwise the
// first/last sample is genuinely indistinguishable from clean signal or
// tail and "exact (n0, M)" stops being well-defined for that realization.
struct TablePulseFixture {
    depulse::Signal clean, degraded;
    std::size_t n0_true = 30000;
    int m_true = 10;
    depulse::ShapeTailParams truth{0.3, 0.07, 0.013, 60.0, 20.0, 0.0};
    int tail_len = 7000;
};

inline TablePulseFixture make_table_fixture(uint64_t seed, int tail_len = 7600) {
    TablePulseFixture fx;
    fx.tail_len = tail_len;
    fx.clean = ar_test_signal(seed, 3 * 44100, 0.035, 44100, 0.035);

    depulse::InjectionSpec spec;
    const double sd = std::sqrt(0.5);
    for (uint64_t k = 0;; ++k) {
        depulse::Rng probe = depulse::Rng::for_stream(seed * 1000 + k, 0);
        double first = 0.0, last = 0.0;
        for (int i = 0; i < fx.m_true; ++i) {
            const double draw = sd * probe.normal();
            if (i == 0) first = draw;
            if (i == fx.m_true - 1) last = draw;
        }
        if (std::abs(first) >= 0.3 && std::abs(last) >= 0.3) {
            spec.seed = seed * 1000 + k;
            break;
        }
    }

    depulse::PulseSpec p;
    p.n0 = fx.n0_true;
    p.m = fx.m_true;
    p.sigma_d2 = 0.5;
    p.tail = fx.truth;
    p.tail_len = tail_len;
    spec.pulses.push_back(p);
    fx.degraded = depulse::inject_pulse(fx.clean, spec);
    return fx;
}

}  // namespace test_support
