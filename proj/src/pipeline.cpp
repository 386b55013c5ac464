#include "depulse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <mutex>

#include "depulse/errors.hpp"
#include "depulse/rng.hpp"

namespace depulse {

Signal inject_pulse(const Signal& clean, const InjectionSpec& spec) {
    clean.validate();
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const PulseSpec& p : spec.pulses) {
        if (p.m < 1 || p.tail_len < 0) throw SpecError("pulse spec: M must be >= 1, tail_len >= 0");
        if (p.sigma_d2 < 0.0) throw SpecError("pulse spec: sigma_d2 must be >= 0");
        const std::size_t end = p.n0 + static_cast<std::size_t>(p.m) +
                                static_cast<std::size_t>(p.tail_len);
        if (end > clean.size())
            throw SpecError("pulse spec: pulse at " + std::to_string(p.n0) +
                            " runs past the end of the signal");
        spans.emplace_back(p.n0, end);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
        if (spans[i].first < spans[i - 1].second)
            throw SpecError("pulse spec: overlapping pulses are not supported");

    Signal out = clean;
    for (std::size_t i = 0; i < spec.pulses.size(); ++i) {
        const PulseSpec& p = spec.pulses[i];
        Rng rng = Rng::for_stream(spec.seed, i);
        const double sd = std::sqrt(p.sigma_d2);
        for (int k = 0; k < p.m; ++k) out.samples[p.n0 + k] += sd * rng.normal();
        if (p.tail_len > 0) {
            const Eigen::VectorXd tail = synth_shape_tail(p.tail, p.tail_len, clean.sample_rate_hz);
            for (int k = 0; k < p.tail_len; ++k)
                out.samples[p.n0 + p.m + k] += tail(k);
        }
    }
    return out;
}

Eigen::VectorXd fade_out_tail(Eigen::VectorXd v_t, int n_fade) {
    const auto n = static_cast<int>(v_t.size());
    if (n_fade < 0 || n_fade > n) throw DimensionError("fade length out of range");
    for (int j = 0; j < n_fade; ++j)
        v_t(n - n_fade + j) *= static_cast<double>(n_fade - 1 - j) / n_fade;
    return v_t;
}

double snr_db(const Signal& reference, const Signal& test) {
    if (reference.size() != test.size()) throw DimensionError("SNR: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double r = reference.samples[i];
        const double e = r - test.samples[i];
        num += r * r;
        den += e * e;
    }
    if (den == 0.0) return 300.0;
    if (num == 0.0) return -300.0;
    return std::clamp(10.0 * std::log10(num / den), -300.0, 300.0);
}

ExcerptRestoreResult restore_excerpt(const Excerpt& excerpt, const Detection& det,
                                     const RestoreConfig& cfg, uint64_t pulse_seed) {
    const auto n = static_cast<int>(excerpt.size());
    const auto n0 = static_cast<int>(det.n0);
    const auto m = static_cast<int>(det.m);
    if (n0 + m >= n) throw SpecError("detection does not leave room for a tail in the excerpt");
    if (n0 < cfg.ar_fit_len)
        throw ContextError("only " + std::to_string(n0) + " samples precede n0, need " +
                           std::to_string(cfg.ar_fit_len));

    const auto t0 = std::chrono::steady_clock::now();

    GibbsProblem problem;
    problem.y = Eigen::Map<const Eigen::VectorXd>(excerpt.samples.data(), n);
    problem.sample_rate_hz = excerpt.sample_rate_hz;
    problem.kind = cfg.model;
    problem.n0_init = n0;
    problem.m_init = m;
    problem.min_n0 = cfg.ar_fit_len;
    problem.ar = estimate_ar_covariance(
        std::span<const double>(excerpt.samples.data(), static_cast<std::size_t>(cfg.ar_fit_len)),
        cfg.ar_order);

    // Order-zero model for x2: white noise with the signal's own power,
    // fitted on the same clean stretch as the AR model.
    double clean_pow = 0.0;
    for (int k = 0; k < cfg.ar_fit_len; ++k)
        clean_pow += excerpt.samples[k] * excerpt.samples[k];
    problem.tail_var = std::max(clean_pow / cfg.ar_fit_len, 1e-12);

    // Initial burst variance from the flagged gap itself.
    double var = 0.0, mean = 0.0;
    for (int k = 0; k < m; ++k) mean += excerpt.samples[n0 + k];
    mean /= m;
    for (int k = 0; k < m; ++k) {
        const double d = excerpt.samples[n0 + k] - mean;
        var += d * d;
    }
    problem.sigma_d2_init = std::max(var / m, 1e-9);

    if (cfg.model == TailModelKind::kGp) {
        const auto tail_len = static_cast<std::size_t>(n - n0 - m);
        problem.gp_init = fit_gp_hyperparams(
            std::span<const double>(excerpt.samples.data() + n0 + m, tail_len), cfg.gp_fit);
    }

    SamplerConfig sampler = cfg.sampler;
    sampler.seed = pulse_seed;

    ExcerptRestoreResult out;
    out.chain = run_gibbs(problem, sampler);
    out.report.estimate = chain_estimate(out.chain, sampler.burn_in, sampler.thin);
    out.report.ok = true;
    out.report.detection = det;
    out.report.loc_rate_all = out.chain.loc_acceptance_rate(0);
    out.report.loc_rate_post = out.chain.loc_acceptance_rate(sampler.burn_in);
    if (cfg.model == TailModelKind::kShape)
        for (int i = 0; i < kShapeParamCount; ++i) {
            out.report.shape_rate_all[i] = out.chain.shape_acceptance_rate(i, 0);
            out.report.shape_rate_post[i] = out.chain.shape_acceptance_rate(i, sampler.burn_in);
        }

    const PosteriorEstimate& est = out.report.estimate;
    out.restored = excerpt;
    for (int k = 0; k < est.modal_m; ++k)
        out.restored.samples[est.modal_n0 + k] = est.x1(k);

    Eigen::VectorXd tail = est.v_t;
    if (cfg.model == TailModelKind::kGp || cfg.fade_shape_model)
        tail = fade_out_tail(std::move(tail), std::min<int>(cfg.fade_len,
                                                            static_cast<int>(tail.size())));
    const int i2s = est.modal_n0 + est.modal_m;
    for (int k = 0; k < tail.size(); ++k) out.restored.samples[i2s + k] -= tail(k);

    out.report.wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    return out;
}

std::pair<Signal, RestorationReport> restore_signal(const Signal& degraded,
                                                    const std::vector<Detection>& detections,
                                                    const RestoreConfig& cfg) {
    degraded.validate();
    for (std::size_t i = 1; i < detections.size(); ++i)
        if (detections[i].n0 < detections[i - 1].n0 + detections[i - 1].m)
            throw SpecError("detections must be disjoint and sorted");

    const auto len = degraded.size();
    const auto excerpt_len = std::min<std::size_t>(cfg.excerpt_len, len);

    std::mutex chain_mutex;
    auto process_one = [&](std::size_t i) -> std::pair<Excerpt, PulseReport> {
        const Detection& det = detections[i];
        PulseReport rep;
        rep.detection = det;
        Excerpt restored;
        try {
            const std::size_t offset = std::min<std::size_t>(cfg.excerpt_offset, det.n0);
            std::size_t start = det.n0 - offset;
            start = std::min(start, len - excerpt_len);
            Excerpt ex = extract_excerpt(degraded, start, excerpt_len);

            Detection local = det;
            local.n0 = det.n0 - start;
            ExcerptRestoreResult res =
                restore_excerpt(ex, local, cfg, Rng::mix(cfg.seed, i));
            rep = std::move(res.report);
            rep.detection = det;
            rep.excerpt_start = start;
            restored = std::move(res.restored);
            if (cfg.on_chain) {
                std::lock_guard<std::mutex> lock(chain_mutex);
                cfg.on_chain(i, start, res.chain);
            }
        } catch (const Error& e) {
            rep.ok = false;
            rep.error = e.what();
        }
        return {std::move(restored), std::move(rep)};
    };

    std::vector<std::pair<Excerpt, PulseReport>> results(detections.size());
    if (cfg.jobs > 1 && detections.size() > 1) {
        std::vector<std::future<void>> futs;
        std::atomic<std::size_t> next{0};
        const int workers = std::min<int>(cfg.jobs, static_cast<int>(detections.size()));
        for (int w = 0; w < workers; ++w)
            futs.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next.fetch_add(1); i < detections.size();
                     i = next.fetch_add(1))
                    results[i] = process_one(i);
            }));
        for (auto& f : futs) f.get();
    } else {
        for (std::size_t i = 0; i < detections.size(); ++i) results[i] = process_one(i);
    }

    Signal out = degraded;
    RestorationReport report;
    for (auto& [restored, rep] : results) {
        if (rep.ok) replace_excerpt(out, restored);  // detection order, serialized
        report.pulses.push_back(std::move(rep));
    }
    return {std::move(out), std::move(report)};
}

}  // namespace depulse
