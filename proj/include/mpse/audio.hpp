#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpse {

inline constexpr int kSampleRate = 16000;

/// Mono waveform in double precision, nominal range [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

/// Throws std::invalid_argument if the sample rate is non-positive or any sample is NaN/Inf.
void validate(const Waveform& w);

class WavError : public std::runtime_error {
public:
    WavError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// RIFF/WAVE, PCM 16-bit little-endian, mono, 16 kHz only. Anything else is a
// WavError whose field() names the offending header field.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::vector<unsigned char>& bytes);

void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<unsigned char> encode_wav(const Waveform& w);

}  // namespace mpse
