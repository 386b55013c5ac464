#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "depulse/detector.hpp"
#include "depulse/gibbs.hpp"
#include "depulse/pulse_models.hpp"
#include "depulse/signal.hpp"

namespace depulse {

// One synthetic pulse: white noise of variance sigma_d2 over [n0, n0+m),
// the parametric tail over the following tail_len samples.
struct PulseSpec {
    std::size_t n0 = 0;
    int m = 1;
    double sigma_d2 = 0.0;
    ShapeTailParams tail;
    int tail_len = 0;
};

struct InjectionSpec {
    std::vector<PulseSpec> pulses;
    uint64_t seed = 0;
};

// Adds the degradations to a copy of the clean signal. Pulses must fit
// inside the signal and must not overlap (SpecError otherwise). Each pulse
// draws from its own stream derived from (seed, pulse index).
Signal inject_pulse(const Signal& clean, const InjectionSpec& spec);

// Multiplies the last n_fade samples by a linear ramp ending at zero.
Eigen::VectorXd fade_out_tail(Eigen::VectorXd v_t, int n_fade);

// 10 log10(sum ref^2 / sum (ref-test)^2), clamped to +-300 dB.
double snr_db(const Signal& reference, const Signal& test);

struct RestoreConfig {
    TailModelKind model = TailModelKind::kGp;
    SamplerConfig sampler;       // iterations/burn-in chosen by the caller per model
    int excerpt_len = 8000;
    int excerpt_offset = 500;    // where n0 lands inside the excerpt
    int ar_order = 40;
    int ar_fit_len = 450;        // samples before n0 feeding the AR fit
    int fade_len = 1000;
    bool fade_shape_model = false;  // fade-out is a GP-model heuristic by default
    uint64_t seed = 0;              // master seed; pulse i uses stream mix(seed, i)
    GpFitOptions gp_fit;
    int jobs = 1;  // pulses processed concurrently (results independent of schedule)
    // Called once per successfully processed pulse (serialized) so callers
    // can persist the chain without the pipeline retaining every one.
    std::function<void(std::size_t pulse_index, std::size_t excerpt_start, const Chain&)>
        on_chain;
};

struct PulseReport {
    Detection detection;  // global coordinates
    bool ok = false;
    std::string error;
    std::size_t excerpt_start = 0;
    PosteriorEstimate estimate;  // excerpt coordinates
    double loc_rate_all = 0.0, loc_rate_post = 0.0;
    std::array<double, kShapeParamCount> shape_rate_all{}, shape_rate_post{};
    double wall_ms = 0.0;
};

struct RestorationReport {
    std::vector<PulseReport> pulses;
};

struct ExcerptRestoreResult {
    Excerpt restored;
    PulseReport report;
    Chain chain;
};

// Full treatment of one excerpt: AR pre-fit on the first ar_fit_len
// samples, GP hyperparameter fit on the initial tail (GP model), Gibbs run,
// interpolation of x1 and subtraction of the (faded) tail estimate.
// The detection is in excerpt coordinates. Throws ContextError when fewer
// than ar_fit_len samples precede n0.
ExcerptRestoreResult restore_excerpt(const Excerpt& excerpt, const Detection& det,
                                     const RestoreConfig& cfg, uint64_t pulse_seed);

// Per detection: center an excerpt, restore it, write it back. Individual
// pulse failures are recorded in the report and do not abort the others.
std::pair<Signal, RestorationReport> restore_signal(const Signal& degraded,
                                                    const std::vector<Detection>& detections,
                                                    const RestoreConfig& cfg);

}  // namespace depulse
