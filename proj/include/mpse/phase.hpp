#pragma once

#include "mpse/grid.hpp"

namespace mpse {

/// |t - 2*pi*round(t / 2*pi)|: the angular distance of t from the nearest
/// multiple of 2*pi. Result lies in [0, pi], even and 2*pi-periodic in t.
double anti_wrap(double t) noexcept;
RealGrid anti_wrap(const RealGrid& t);

/// Slope of anti_wrap at t: +1 or -1, and 0 on the kinks (t = k*pi).
double anti_wrap_slope(double t) noexcept;

/// Maps t into (-pi, pi], congruent to t modulo 2*pi.
double wrap_to_principal(double t) noexcept;
RealGrid wrap_to_principal(const RealGrid& t);

enum class DiffAxis { frequency, time };

/// First differences of a phase grid along one axis; the differenced axis
/// shrinks by one (no boundary padding).
struct PhaseDiffSpectrum {
    DiffAxis axis;
    RealGrid values;
};

/// out[t][f] = p[t][f+1] - p[t][f]; shape T x (F-1). Group delay up to sign.
PhaseDiffSpectrum diff_freq(const RealGrid& p);
/// out[t][f] = p[t+1][f] - p[t][f]; shape (T-1) x F. Instantaneous angular frequency.
PhaseDiffSpectrum diff_time(const RealGrid& p);

/// Magnitude-weighted mean anti-wrapped phase error, in degrees [0, 180].
/// Throws std::invalid_argument on shape mismatch or an all-zero magnitude.
double phase_distance(const MagnitudeSpectrum& target_mag, const PhaseSpectrum& target_phase,
                      const PhaseSpectrum& estimate_phase);

}  // namespace mpse
