#pragma once

#include <utility>
#include <vector>

#include "mpse/audio.hpp"
#include "mpse/grid.hpp"

namespace mpse {

enum class WindowKind { hann };

/// Analysis/synthesis parameters. Defaults are the 16 kHz model configuration:
/// 400-point FFT, 25 ms Hann window, 6.25 ms hop, magnitude compression 0.3.
struct StftConfig {
    int n_fft = 400;
    int win_length = 400;
    int hop_length = 100;
    WindowKind window = WindowKind::hann;
    bool center = true;
    double compression_factor = 0.3;

    int bins() const noexcept { return n_fft / 2 + 1; }
    /// Frames produced for a waveform of `length` samples.
    int frames(std::size_t length) const;
};

/// Throws std::invalid_argument naming the violated constraint.
void validate(const StftConfig& cfg);

/// Periodic Hann of win_length, zero-padded symmetrically to n_fft.
std::vector<double> analysis_window(const StftConfig& cfg);

/// Max relative deviation of sum_k w^2[n - k*hop] from its mean over one hop period.
double cola_deviation(const StftConfig& cfg);

ComplexSpectrum stft(const Waveform& w, const StftConfig& cfg);
ComplexSpectrum stft(std::span<const double> samples, const StftConfig& cfg);

/// Windowed overlap-add with squared-window normalization, then truncated or
/// zero-padded to out_len samples.
Waveform istft(const ComplexSpectrum& spec, const StftConfig& cfg, std::size_t out_len);

std::pair<MagnitudeSpectrum, PhaseSpectrum> mag_phase(const ComplexSpectrum& spec);

/// mag * exp(j * phase), cellwise.
ComplexSpectrum polar(const MagnitudeSpectrum& mag, const PhaseSpectrum& phase);

MagnitudeSpectrum compress(const MagnitudeSpectrum& mag, double c);
MagnitudeSpectrum decompress(const MagnitudeSpectrum& mag, double c);

/// STFT(iSTFT(S)). The intermediate waveform has the natural length for T frames,
/// so consistent spectra are fixed points and the operator is idempotent.
ComplexSpectrum consistency_project(const ComplexSpectrum& spec, const StftConfig& cfg);

}  // namespace mpse
