#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpse/audio.hpp"
#include "mpse/grid.hpp"
#include "mpse/spectral.hpp"

namespace mpse {

/// Weights of the generator objective, in the order magnitude, phase, complex,
/// consistency, metric.
struct LossWeights {
    double mag = 0.9;
    double pha = 0.3;
    double com = 0.1;
    double con = 0.1;
    double metric = 0.05;
};

/// A loss value and its gradient with respect to the estimate.
struct LossGradient {
    double value = 0.0;
    RealGrid grad;
};

struct PhaseLoss {
    double ip = 0.0;
    double gd = 0.0;
    double iaf = 0.0;
    RealGrid grad;  ///< d(ip + gd + iaf) / d(estimate phase)

    double total() const noexcept { return ip + gd + iaf; }
};

struct ComplexLoss {
    double value = 0.0;
    RealGrid grad_mag;
    RealGrid grad_phase;
};

// All expectations are full-grid means; see README for the reduction convention.

/// Mean squared error between compressed magnitudes.
LossGradient loss_magnitude(const MagnitudeSpectrum& target_c, const MagnitudeSpectrum& estimate_c);

/// Anti-wrapped instantaneous-phase, group-delay and instantaneous-frequency
/// losses. Requires T >= 2 and F >= 2. The gradient uses slope 0 on kinks.
PhaseLoss loss_phase(const PhaseSpectrum& target, const PhaseSpectrum& estimate);

/// MSE over real parts plus MSE over imaginary parts of target - mag*exp(j*phase).
ComplexLoss loss_complex(const ComplexSpectrum& target, const MagnitudeSpectrum& est_mag,
                         const PhaseSpectrum& est_phase);

/// Distance of mag*exp(j*phase) from its consistency projection. Value only.
double loss_consistency(const MagnitudeSpectrum& est_mag, const PhaseSpectrum& est_phase, const StftConfig& cfg);

/// Maps (reference, estimate) to a normalized quality score.
using Discriminator = std::function<double(const Waveform& reference, const Waveform& estimate)>;

/// Wraps a quality function so its output is clamped to [0, 1].
Discriminator make_quality_oracle(Discriminator raw);

/// Linear map of a PESQ score from [-0.5, 4.5] onto [0, 1], clamped.
double scale_pesq(double pesq) noexcept;

/// Reference discriminator that ignores its inputs.
Discriminator constant_discriminator(double score);

/// (D(x, x) - 1)^2 + (D(x, xhat) - q)^2. Throws if q is outside [0, 1].
double loss_discriminator(const Discriminator& d, const Waveform& clean, const Waveform& enhanced, double q);

/// (D(x, xhat) - 1)^2
double loss_metric(const Discriminator& d, const Waveform& clean, const Waveform& enhanced);

struct ComponentLosses {
    double mag = 0.0;
    double ip = 0.0;
    double gd = 0.0;
    double iaf = 0.0;
    double com = 0.0;
    double con = 0.0;
    double metric = 0.0;
};

struct LossReport {
    double mag = 0.0;
    double ip = 0.0;
    double gd = 0.0;
    double iaf = 0.0;
    double pha = 0.0;
    double com = 0.0;
    double con = 0.0;
    double metric = 0.0;
    double total = 0.0;
    std::optional<RealGrid> grad_mag_c;
    std::optional<RealGrid> grad_phase;
};

LossReport loss_generator_total(const ComponentLosses& parts, const LossWeights& weights = {});

/// Network-side prediction: compressed magnitude and wrapped phase.
struct SpectralEstimate {
    MagnitudeSpectrum mag_c;
    PhaseSpectrum phase;
};

/// Evaluates every spectrum-based loss of `estimate` against the clean spectrum
/// `target` and combines them. Gradients cover the magnitude, phase and complex
/// terms (the consistency and metric terms are value-only).
LossReport generator_losses(const ComplexSpectrum& target, const SpectralEstimate& estimate, const StftConfig& cfg,
                            const LossWeights& weights = {}, double metric_loss = 0.0);

/// One `name=value` line per scalar, 17 significant digits, fixed key order.
std::string to_text(const LossReport& report);
LossReport parse_loss_report(std::string_view text);

/// Objective returning its value and analytic gradient at a point.
using Objective = std::function<double(std::span<const double> x, std::vector<double>* grad)>;

/// Largest elementwise relative error between the analytic gradient and a
/// central difference with step h, using max(|a|, |fd|, 1e-8) as denominator.
double fd_gradient_check(const Objective& f, std::span<const double> point, double h);

/// Smallest distance to a multiple of pi over every phase error, group-delay
/// error and frequency error entering loss_phase. Gradient checks need this to
/// exceed the finite-difference step.
double phase_kink_margin(const PhaseSpectrum& target, const PhaseSpectrum& estimate);

}  // namespace mpse
