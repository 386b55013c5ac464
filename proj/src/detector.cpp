#include "depulse/detector.hpp"

#include <algorithm>
#include <cmath>

#include "depulse/errors.hpp"

namespace depulse {
namespace {

void check_config(const DetectorConfig& cfg) {
    if (cfg.block_len < 2) throw ConfigError("detector: block length must be >= 2");
    if (cfg.block_len % 2 != 0) throw ConfigError("detector: block length must be even");
    if (cfg.median_len < 1 || cfg.median_len % 2 == 0)
        throw ConfigError("detector: median window must be odd and positive");
    if (!(cfg.xi > 0.0)) throw ConfigError("detector: xi must be positive");
    if (cfg.f_co_hz < 0.0) throw ConfigError("detector: cutoff frequency must be >= 0");
}

}  // namespace

std::vector<double> high_band_mean(const Signal& s, const DetectorConfig& cfg) {
    check_config(cfg);
    const int len = static_cast<int>(s.size());
    const int l = cfg.block_len;
    if (len < l) throw DimensionError("signal shorter than one detector block");

    const int beta = l / 2;
    const int alpha = static_cast<int>(std::lround(cfg.f_co_hz * l / s.sample_rate_hz));
    if (alpha > beta)
        throw ConfigError("detector: cutoff bin " + std::to_string(alpha) +
                          " beyond Nyquist bin " + std::to_string(beta));

    // Twiddle table; bin k of block data x is sum_m x[m] * w^(k*m).
    std::vector<double> cs(l), sn(l);
    for (int t = 0; t < l; ++t) {
        cs[t] = std::cos(2.0 * M_PI * t / l);
        sn[t] = std::sin(2.0 * M_PI * t / l);
    }

    const int hop = l / 2;
    const int nblocks = (len - l) / hop + 1;
    std::vector<double> mu(nblocks);
    for (int b = 0; b < nblocks; ++b) {
        const double* x = s.samples.data() + static_cast<std::size_t>(b) * hop;
        double acc = 0.0;
        for (int k = alpha; k <= beta; ++k) {
            double re = 0.0, im = 0.0;
            for (int m = 0; m < l; ++m) {
                const int t = (k * m) % l;
                re += x[m] * cs[t];
                im -= x[m] * sn[t];
            }
            acc += std::hypot(re, im);
        }
        mu[b] = acc / (beta - alpha + 1);
    }
    return mu;
}

std::vector<double> median_filter(const std::vector<double>& seq, int c) {
    if (c < 1 || c % 2 == 0) throw ConfigError("median filter: window must be odd and positive");
    const int n = static_cast<int>(seq.size());
    const int half = c / 2;
    std::vector<double> out(seq.size());
    std::vector<double> window;
    window.reserve(c);
    for (int i = 0; i < n; ++i) {
        window.clear();
        for (int j = i - half; j <= i + half; ++j)
            window.push_back(j >= 0 && j < n ? seq[j] : 0.0);  // zero padding
        auto mid = window.begin() + half;
        std::nth_element(window.begin(), mid, window.end());
        out[i] = *mid;
    }
    return out;
}

DetectorTrace detector_trace(const Signal& s, const DetectorConfig& cfg) {
    DetectorTrace tr;
    tr.mu = high_band_mean(s, cfg);
    tr.mu_m = median_filter(tr.mu, cfg.median_len);
    tr.delta.resize(tr.mu.size());
    double mx = 0.0;
    for (std::size_t b = 0; b < tr.mu.size(); ++b) {
        tr.delta[b] = tr.mu[b] - tr.mu_m[b];
        mx = std::max(mx, tr.delta[b]);
    }
    if (cfg.normalize) {
        if (mx <= 1e-12)
            throw NoPulseEvidenceError(
                "detector: max(mu - mu_m) vanishes; the normalized threshold assumes the "
                "signal contains at least one pulse");
        for (double& d : tr.delta) d /= mx;
    }
    return tr;
}

std::vector<Detection> detect_pulses(const Signal& s, const DetectorConfig& cfg,
                                     const DetectorTrace& tr) {
    check_config(cfg);
    const int hop = cfg.block_len / 2;
    const int nblocks = static_cast<int>(tr.delta.size());

    std::vector<Detection> out;
    int b = 0;
    while (b < nblocks) {
        if (std::abs(tr.delta[b]) < cfg.xi) {
            ++b;
            continue;
        }
        const int first = b;
        bool has_onset = false;
        double score = 0.0;
        while (b < nblocks && std::abs(tr.delta[b]) >= cfg.xi) {
            has_onset = has_onset || tr.delta[b] >= cfg.xi;
            score = std::max(score, std::abs(tr.delta[b]));
            ++b;
        }
        const int last = b - 1;
        if (!has_onset) continue;  // a dip alone is not an onset
        Detection d;
        d.n0 = static_cast<std::size_t>(first) * hop;
        d.m = static_cast<std::size_t>(last - first) * hop + cfg.block_len;
        d.score = score;
        out.push_back(d);
    }
    return out;
}

std::vector<Detection> detect_pulses(const Signal& s, const DetectorConfig& cfg) {
    return detect_pulses(s, cfg, detector_trace(s, cfg));
}

}  // namespace depulse
