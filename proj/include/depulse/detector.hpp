#pragma once

#include <cstddef>
#include <vector>

#include "depulse/signal.hpp"

namespace depulse {

struct DetectorConfig {
    int block_len = 16;       // L, DFT block length (50% overlap between blocks)
    double xi = 0.3;          // detection threshold on the normalized delta-mu
    int median_len = 5;       // c, odd median-filter window
    double f_co_hz = 3000.0;  // cutoff: bins at and above it feed the mean
    bool normalize = true;    // divide by max(mu - mu_m); disabling makes xi absolute
};

struct Detection {
    std::size_t n0 = 0;   // first sample of the first flagged block (0-based)
    std::size_t m = 0;    // gap length in samples
    double score = 0.0;   // max |delta_mu| over the contiguous group
};

// Per-block mean of the high-frequency DFT magnitudes, its median-filtered
// version, and their (optionally normalized) difference.
struct DetectorTrace {
    std::vector<double> mu;
    std::vector<double> mu_m;
    std::vector<double> delta;
};

// mu(b) over blocks of length L with hop L/2: the arithmetic mean of
// |DFT(k)| for k from round(f_co*L/fs) up to L/2.
std::vector<double> high_band_mean(const Signal& s, const DetectorConfig& cfg);

// Median filter with zero padding of floor(c/2) on both ends; output length
// equals input length. c must be odd.
std::vector<double> median_filter(const std::vector<double>& seq, int c);

DetectorTrace detector_trace(const Signal& s, const DetectorConfig& cfg);

// Groups contiguous flagged blocks into detections. Only groups containing a
// positive excursion produce a Detection; purely negative dips are ignored.
// Throws NoPulseEvidenceError when max(mu - mu_m) vanishes, since the
// normalization assumes the signal contains at least one pulse.
std::vector<Detection> detect_pulses(const Signal& s, const DetectorConfig& cfg);

std::vector<Detection> detect_pulses(const Signal& s, const DetectorConfig& cfg,
                                     const DetectorTrace& trace);

}  // namespace depulse
