#include "depulse/signal.hpp"

#include <cmath>

#include "depulse/errors.hpp"

namespace depulse {

void Signal::validate() const {
    if (samples.empty()) throw FormatError("signal is empty");
    if (sample_rate_hz <= 0) throw FormatError("sample rate must be positive");
    for (double v : samples) {
        if (!std::isfinite(v)) throw FormatError("signal contains non-finite sample");
    }
}

Excerpt extract_excerpt(const Signal& s, std::size_t start, std::size_t n) {
    if (start > s.size() || n > s.size() - start)
        throw BoundsError("excerpt [" + std::to_string(start) + ", " + std::to_string(start + n) +
                          ") exceeds signal length " + std::to_string(s.size()));
    Excerpt e;
    e.start = start;
    e.sample_rate_hz = s.sample_rate_hz;
    e.samples.assign(s.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     s.samples.begin() + static_cast<std::ptrdiff_t>(start + n));
    return e;
}

void replace_excerpt(Signal& s, const Excerpt& e) {
    if (e.start > s.size() || e.size() > s.size() - e.start)
        throw BoundsError("excerpt does not fit inside signal");
    std::copy(e.samples.begin(), e.samples.end(),
              s.samples.begin() + static_cast<std::ptrdiff_t>(e.start));
}

}  // namespace depulse
