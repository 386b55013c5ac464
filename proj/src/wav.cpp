#include "depulse/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "depulse/errors.hpp"

namespace depulse {
namespace {

constexpr double kScale = 32768.0;  // 2^15

uint32_t rd_u32(const unsigned char* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Signal read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);

    unsigned char hdr[12];
    if (!f.read(reinterpret_cast<char*>(hdr), 12)) throw IoError("truncated header in " + path);
    if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
        throw FormatError(path + " is not a RIFF/WAVE file");

    bool have_fmt = false;
    uint16_t channels = 0, bits = 0, audio_format = 0;
    uint32_t rate = 0;
    std::vector<unsigned char> data;
    bool have_data = false;

    unsigned char chdr[8];
    while (f.read(reinterpret_cast<char*>(chdr), 8)) {
        const uint32_t sz = rd_u32(chdr + 4);
        if (std::memcmp(chdr, "fmt ", 4) == 0) {
            if (sz < 16) throw FormatError("fmt chunk too small in " + path);
            std::vector<unsigned char> fmt(sz);
            if (!f.read(reinterpret_cast<char*>(fmt.data()), sz))
                throw IoError("truncated fmt chunk in " + path);
            audio_format = rd_u16(fmt.data());
            channels = rd_u16(fmt.data() + 2);
            rate = rd_u32(fmt.data() + 4);
            bits = rd_u16(fmt.data() + 14);
            have_fmt = true;
        } else if (std::memcmp(chdr, "data", 4) == 0) {
            data.resize(sz);
            if (!f.read(reinterpret_cast<char*>(data.data()), sz))
                throw IoError("truncated data chunk in " + path);
            have_data = true;
        } else {
            f.seekg(sz + (sz & 1u), std::ios::cur);  // chunks are word-aligned
        }
        if (sz & 1u && std::memcmp(chdr, "data", 4) == 0) f.seekg(1, std::ios::cur);
    }
    if (!have_fmt || !have_data) throw IoError("missing fmt/data chunk in " + path);
    if (audio_format != 1) throw FormatError("only PCM supported: " + path);
    if (channels != 1) throw FormatError("only mono supported, got " + std::to_string(channels) +
                                         " channels: " + path);
    if (bits != 16) throw FormatError("only 16-bit supported, got " + std::to_string(bits) +
                                      " bits: " + path);
    if (rate == 0) throw FormatError("zero sample rate in " + path);
    if (data.size() % 2 != 0) throw IoError("odd-sized data chunk in " + path);

    Signal s;
    s.sample_rate_hz = static_cast<int>(rate);
    s.samples.resize(data.size() / 2);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const int16_t raw = static_cast<int16_t>(rd_u16(data.data() + 2 * i));
        s.samples[i] = static_cast<double>(raw) / kScale;
    }
    return s;
}

void write_wav(const std::string& path, const Signal& s) {
    s.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");

    const uint32_t data_bytes = static_cast<uint32_t>(s.samples.size() * 2);
    f.write("RIFF", 4);
    wr_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    wr_u32(f, 16);
    wr_u16(f, 1);  // PCM
    wr_u16(f, 1);  // mono
    wr_u32(f, static_cast<uint32_t>(s.sample_rate_hz));
    wr_u32(f, static_cast<uint32_t>(s.sample_rate_hz) * 2);  // byte rate
    wr_u16(f, 2);                                            // block align
    wr_u16(f, 16);                                           // bits per sample
    f.write("data", 4);
    wr_u32(f, data_bytes);

    const double hi = 1.0 - 1.0 / kScale;
    for (double v : s.samples) {
        double c = v < -1.0 ? -1.0 : (v > hi ? hi : v);
        const auto raw = static_cast<int16_t>(std::lrint(c * kScale));
        wr_u16(f, static_cast<uint16_t>(raw));
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace depulse
