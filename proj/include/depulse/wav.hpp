#pragma once

#include <string>

#include "depulse/signal.hpp"

namespace depulse {

// Reads a RIFF/WAVE file. Only PCM 16-bit little-endian mono is accepted;
// anything else raises FormatError, truncated files raise IoError.
// Raw integers are scaled to [-1, 1) by division by 2^15.
Signal read_wav(const std::string& path);

// Writes PCM 16-bit mono. Samples are clamped to [-1, 1 - 2^-15] and then
// rounded to the nearest integer, so read_wav(write_wav(s)) reproduces the
// raw integers exactly.
void write_wav(const std::string& path, const Signal& s);

}  // namespace depulse
