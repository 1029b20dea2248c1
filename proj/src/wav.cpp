#include "biatt/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace biatt {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open WAV file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 44) throw IoError("file too short to be a WAV: " + path);
    if (std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const char* id = reinterpret_cast<const char*>(buf.data() + pos);
        const std::uint32_t len = read_u32(buf.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > buf.size()) throw IoError("truncated chunk in WAV: " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw IoError("malformed fmt chunk: " + path);
            format = read_u16(buf.data() + body);
            channels = read_u16(buf.data() + body + 2);
            rate = read_u32(buf.data() + body + 4);
            bits = read_u16(buf.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = buf.data() + body;
            data_len = len;
        }
        pos = body + len + (len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || data == nullptr) throw IoError("WAV missing fmt or data chunk: " + path);
    if (format != 1) throw IoError("unsupported WAV encoding (PCM required): " + path);
    if (channels != 1) throw IoError("unsupported channel count " + std::to_string(channels) + " (mono required): " + path);
    if (bits != 16) throw IoError("unsupported bit depth " + std::to_string(bits) + " (16-bit required): " + path);

    Waveform wave;
    wave.sample_rate = static_cast<int>(rate);
    const std::size_t n = data_len / 2;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s = static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
        wave.samples[i] = static_cast<double>(s) / 32767.0;
    }
    return wave;
}

void write_wav(const std::string& path, const Waveform& wave) {
    const std::uint32_t n = static_cast<std::uint32_t>(wave.samples.size());
    const std::uint32_t data_len = n * 2;

    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);  // byte rate
    put_u16(out, 2);                                                 // block align
    put_u16(out, 16);                                                // bits
    out += "data";
    put_u32(out, data_len);
    for (double x : wave.samples) {
        if (!std::isfinite(x)) throw InvalidInput("non-finite sample in waveform");
        double q = std::round(x * 32767.0);
        if (q > 32767.0) q = 32767.0;
        if (q < -32768.0) q = -32768.0;
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

void validate_pipeline_input(const Waveform& wave, int expected_rate) {
    if (wave.sample_rate != expected_rate)
        throw InvalidInput("sample rate " + std::to_string(wave.sample_rate) + " Hz, pipeline requires " +
                           std::to_string(expected_rate) + " Hz");
    for (double x : wave.samples)
        if (!std::isfinite(x)) throw InvalidInput("non-finite sample in waveform");
}

}  // namespace biatt
