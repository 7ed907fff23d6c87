#include "mpse/phase.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mpse {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

// std::remainder computes t - 2pi*n with n = nearest integer to t/2pi, exactly.
// It breaks ties to even rather than away from zero; ties only occur where
// both candidates have distance pi, so the absolute value is unaffected.
double anti_wrap(double t) noexcept { return std::abs(std::remainder(t, kTwoPi)); }

RealGrid anti_wrap(const RealGrid& t) {
    RealGrid out(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = anti_wrap(t[i]);
    return out;
}

double anti_wrap_slope(double t) noexcept {
    const double r = std::remainder(t, kTwoPi);
    if (r == 0.0 || std::abs(r) == std::numbers::pi) return 0.0;
    return r > 0.0 ? 1.0 : -1.0;
}

double wrap_to_principal(double t) noexcept {
    const double r = std::remainder(t, kTwoPi);
    return r <= -std::numbers::pi ? r + kTwoPi : r;
}

RealGrid wrap_to_principal(const RealGrid& t) {
    RealGrid out(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = wrap_to_principal(t[i]);
    return out;
}

PhaseDiffSpectrum diff_freq(const RealGrid& p) {
    if (p.cols() < 2) throw std::invalid_argument("diff_freq: need at least 2 frequency bins");
    RealGrid out(p.rows(), p.cols() - 1);
    for (std::size_t t = 0; t < p.rows(); ++t)
        for (std::size_t f = 0; f + 1 < p.cols(); ++f) out(t, f) = p(t, f + 1) - p(t, f);
    return {DiffAxis::frequency, std::move(out)};
}

PhaseDiffSpectrum diff_time(const RealGrid& p) {
    if (p.rows() < 2) throw std::invalid_argument("diff_time: need at least 2 frames");
    RealGrid out(p.rows() - 1, p.cols());
    for (std::size_t t = 0; t + 1 < p.rows(); ++t)
        for (std::size_t f = 0; f < p.cols(); ++f) out(t, f) = p(t + 1, f) - p(t, f);
    return {DiffAxis::time, std::move(out)};
}

double phase_distance(const MagnitudeSpectrum& target_mag, const PhaseSpectrum& target_phase,
                      const PhaseSpectrum& estimate_phase) {
    require_same_shape(target_mag, target_phase, "phase_distance");
    require_same_shape(target_phase, estimate_phase, "phase_distance");
    double total = 0.0;
    for (double m : target_mag) {
        if (!(m >= 0.0)) throw std::invalid_argument("phase_distance: magnitude must be non-negative");
        total += m;
    }
    if (!(total > 0.0)) throw std::invalid_argument("phase_distance: undefined weights (all-zero magnitude)");

    double acc = 0.0;
    for (std::size_t i = 0; i < target_mag.size(); ++i)
        acc += target_mag[i] * anti_wrap(target_phase[i] - estimate_phase[i]);
    // degrees: an error of pi everywhere maps to 180
    return (180.0 / std::numbers::pi) * (acc / total);
}

}  // namespace mpse
