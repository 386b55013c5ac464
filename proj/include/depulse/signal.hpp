#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace depulse {

// Mono sample sequence. Amplitudes are dimensionless with nominal range
// [-1, 1]; sample values are immutable after construction by convention
// (nothing in the library mutates a Signal it did not create).
struct Signal {
    std::vector<double> samples;
    int sample_rate_hz = 44100;

    std::size_t size() const { return samples.size(); }

    // Throws if empty, non-finite samples, or non-positive rate.
    void validate() const;
};

// A contiguous slice of a parent Signal, remembering where it came from so
// it can be written back after processing.
struct Excerpt {
    std::size_t start = 0;
    std::vector<double> samples;
    int sample_rate_hz = 44100;

    std::size_t size() const { return samples.size(); }
};

Excerpt extract_excerpt(const Signal& s, std::size_t start, std::size_t n);

// Overwrites s.samples[e.start .. e.start+e.size()) with the excerpt.
void replace_excerpt(Signal& s, const Excerpt& e);

}  // namespace depulse
