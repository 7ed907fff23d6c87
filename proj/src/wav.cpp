#include "mpse/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mpse {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kBitsPerSample = 16;

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

bool tag_is(const unsigned char* p, const char* tag) { return std::memcmp(p, tag, 4) == 0; }

}  // namespace

void validate(const Waveform& w) {
    if (w.sample_rate <= 0) throw std::invalid_argument("waveform sample_rate must be positive");
    for (double s : w.samples)
        if (!std::isfinite(s)) throw std::invalid_argument("waveform contains non-finite samples");
}

Waveform decode_wav(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 12) throw WavError("riff", "file too small for a RIFF header");
    if (!tag_is(bytes.data(), "RIFF")) throw WavError("riff", "missing RIFF tag");
    if (!tag_is(bytes.data() + 8, "WAVE")) throw WavError("wave", "RIFF form type is not WAVE");

    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t chunk_size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > bytes.size()) {
            throw WavError(tag_is(chunk, "data") ? "data_size" : "chunk_size",
                           "chunk extends past end of file");
        }

        if (tag_is(chunk, "fmt ")) {
            if (chunk_size < 16) throw WavError("fmt_size", "fmt chunk shorter than 16 bytes");
            const unsigned char* f = bytes.data() + body;
            const std::uint16_t audio_format = read_u16(f);
            const std::uint16_t channels = read_u16(f + 2);
            const std::uint32_t rate = read_u32(f + 4);
            const std::uint16_t bits = read_u16(f + 14);
            if (audio_format != kFormatPcm)
                throw WavError("audio_format",
                               "unsupported audio_format " + std::to_string(audio_format) + " (expected 1, PCM)");
            if (channels != 1)
                throw WavError("num_channels",
                               "unsupported num_channels " + std::to_string(channels) + " (expected 1)");
            if (rate != static_cast<std::uint32_t>(kSampleRate))
                throw WavError("sample_rate",
                               "unsupported sample_rate " + std::to_string(rate) + " (expected 16000)");
            if (bits != kBitsPerSample)
                throw WavError("bits_per_sample",
                               "unsupported bits_per_sample " + std::to_string(bits) + " (expected 16)");
            have_fmt = true;
        } else if (tag_is(chunk, "data")) {
            if (!have_fmt) throw WavError("fmt", "data chunk precedes fmt chunk");
            if (chunk_size % 2 != 0) throw WavError("data_size", "data size is not a whole number of samples");
            Waveform w;
            w.sample_rate = kSampleRate;
            w.samples.resize(chunk_size / 2);
            const unsigned char* d = bytes.data() + body;
            for (std::size_t i = 0; i < w.samples.size(); ++i) {
                const auto s = static_cast<std::int16_t>(read_u16(d + 2 * i));
                w.samples[i] = static_cast<double>(s) / 32768.0;
            }
            return w;
        }
        // chunks are word aligned
        pos = body + chunk_size + (chunk_size & 1u);
    }
    throw WavError(have_fmt ? "data" : "fmt", have_fmt ? "missing data chunk" : "missing fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes);
    } catch (const WavError& e) {
        throw WavError(e.field(), path.string() + ": " + e.what());
    }
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
    validate(w);
    if (w.sample_rate != kSampleRate)
        throw WavError("sample_rate", "can only write 16000 Hz audio, got " + std::to_string(w.sample_rate));
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);

    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, kSampleRate);
    put_u32(out, kSampleRate * 2);
    put_u16(out, 2);
    put_u16(out, kBitsPerSample);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (double s : w.samples) {
        const double scaled = std::round(s * 32768.0);
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(q));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
    const auto bytes = encode_wav(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace mpse
