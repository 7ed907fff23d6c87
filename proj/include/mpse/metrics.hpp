#pragma once

#include <string>
#include <vector>

#include "mpse/audio.hpp"
#include "mpse/grid.hpp"

namespace mpse {

inline constexpr double kLsdFloor = 1e-8;

/// Log-spectral distance in dB: mean over frames of the RMS over bins of
/// 20*log10(estimate / reference). Magnitudes below `floor` are clamped to it.
double lsd(const MagnitudeSpectrum& reference, const MagnitudeSpectrum& estimate, double floor = kLsdFloor);

/// Residual-to-target energy ratio at or below which the estimate counts as an
/// exact scaled copy of the reference (roundoff floor, 240 dB).
inline constexpr double kSiSdrExactRatio = 1e-24;

/// Scale-invariant SDR in dB. Returns +infinity when the estimate is a positive
/// or negative multiple of the reference up to roundoff. Throws on unequal
/// lengths or an all-zero reference.
double si_sdr(const Waveform& reference, const Waveform& estimate);

/// "inf"/"-inf" for infinities, otherwise %.*g with `digits` significant digits.
std::string format_number(double v, int digits);

struct Mixture {
    Waveform mixture;
    Waveform scaled_noise;
    double gain = 0.0;
};

/// clean + g * noise, with g chosen so the clean-to-noise energy ratio over the
/// full clip equals snr_db. Shorter noise is tiled, longer noise cropped from 0.
Mixture mix_components(const Waveform& clean, const Waveform& noise, double snr_db);
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

/// Inclusive grid lo, lo+step, ..., hi.
std::vector<double> snr_grid(double lo, double hi, double step);
/// Parses "lo:hi:step".
std::vector<double> parse_snr_grid(const std::string& spec);
/// -5 dB to 15 dB in 2.5 dB steps.
std::vector<double> default_snr_grid();

/// Keeps every factor-th sample, then interpolates back to the original length
/// with a not-a-knot cubic spline. factor must be 2 or 4.
Waveform prepare_narrowband(const Waveform& w, int factor);

/// Not-a-knot cubic spline through knots[i] at x = i*spacing, evaluated at
/// x = 0..length-1 (extrapolating past the last knot with the final piece).
std::vector<double> spline_upsample(const std::vector<double>& knots, int spacing, std::size_t length);

}  // namespace mpse
