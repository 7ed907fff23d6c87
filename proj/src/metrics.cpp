#include "mpse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mpse {

namespace {

double energy(const std::vector<double>& x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

// Second derivatives of a not-a-knot cubic spline on uniform knots.
std::vector<double> not_a_knot_curvature(const std::vector<double>& y, double h) {
    const std::size_t n = y.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    auto rhs = [&](std::size_t i) { return 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h); };
    if (n == 3) {
        std::fill(m.begin(), m.end(), rhs(1) / 6.0);
        return m;
    }
    // Unknowns m[1..n-2]. End rows reduce to 6*m = rhs after eliminating
    // m[0] = 2m[1] - m[2] and m[n-1] = 2m[n-2] - m[n-3].
    const std::size_t k = n - 2;
    std::vector<double> lower(k, 1.0), diag(k, 4.0), upper(k, 1.0), d(k);
    for (std::size_t i = 0; i < k; ++i) d[i] = rhs(i + 1);
    diag[0] = 6.0;
    upper[0] = 0.0;
    diag[k - 1] = 6.0;
    lower[k - 1] = 0.0;
    for (std::size_t i = 1; i < k; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        d[i] -= w * d[i - 1];
    }
    m[k] = d[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = (d[i] - upper[i] * m[i + 2]) / diag[i];
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    return m;
}

}  // namespace

double lsd(const MagnitudeSpectrum& reference, const MagnitudeSpectrum& estimate, double floor) {
    require_same_shape(reference, estimate, "lsd");
    if (reference.empty()) throw std::invalid_argument("lsd: empty spectra");
    if (!(floor > 0.0)) throw std::invalid_argument("lsd: floor must be positive");
    double acc = 0.0;
    for (std::size_t t = 0; t < reference.rows(); ++t) {
        double frame = 0.0;
        for (std::size_t f = 0; f < reference.cols(); ++f) {
            const double r = std::max(reference(t, f), floor);
            const double e = std::max(estimate(t, f), floor);
            const double db = 20.0 * std::log10(e / r);
            frame += db * db;
        }
        acc += std::sqrt(frame / static_cast<double>(reference.cols()));
    }
    return acc / static_cast<double>(reference.rows());
}

double si_sdr(const Waveform& reference, const Waveform& estimate) {
    if (reference.size() != estimate.size()) throw std::invalid_argument("si_sdr: length mismatch");
    const double ref_energy = energy(reference.samples);
    if (!(ref_energy > 0.0)) throw std::invalid_argument("si_sdr: reference is all zeros");
    double dot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) dot += estimate.samples[i] * reference.samples[i];
    const double alpha = dot / ref_energy;
    double target = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double s = alpha * reference.samples[i];
        const double e = estimate.samples[i] - s;
        target += s * s;
        residual += e * e;
    }
    if (residual <= kSiSdrExactRatio * target) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(target / residual);
}

std::string format_number(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

Mixture mix_components(const Waveform& clean, const Waveform& noise, double snr_db) {
    if (clean.empty() || noise.empty()) throw std::invalid_argument("mix_at_snr: empty input");
    if (!std::isfinite(snr_db)) throw std::invalid_argument("mix_at_snr: SNR must be finite");
    Mixture m;
    m.scaled_noise.sample_rate = clean.sample_rate;
    m.scaled_noise.samples.resize(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) m.scaled_noise.samples[i] = noise.samples[i % noise.size()];

    const double ec = energy(clean.samples);
    const double en = energy(m.scaled_noise.samples);
    if (!(ec > 0.0)) throw std::invalid_argument("mix_at_snr: clean signal has zero energy");
    if (!(en > 0.0)) throw std::invalid_argument("mix_at_snr: noise has zero energy");
    m.gain = std::sqrt(ec / (en * std::pow(10.0, snr_db / 10.0)));

    m.mixture = clean;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        m.scaled_noise.samples[i] *= m.gain;
        m.mixture.samples[i] += m.scaled_noise.samples[i];
    }
    return m;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
    return mix_components(clean, noise, snr_db).mixture;
}

std::vector<double> snr_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("snr grid: need lo <= hi and step > 0");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * step;
    return g;
}

std::vector<double> parse_snr_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string p;
    try {
        while (std::getline(ss, p, ':')) parts.push_back(std::stod(p));
    } catch (const std::exception&) {
        throw std::invalid_argument("snr grid: expected lo:hi:step, got '" + spec + "'");
    }
    if (parts.size() != 3) throw std::invalid_argument("snr grid: expected lo:hi:step, got '" + spec + "'");
    return snr_grid(parts[0], parts[1], parts[2]);
}

std::vector<double> default_snr_grid() { return snr_grid(-5.0, 15.0, 2.5); }

std::vector<double> spline_upsample(const std::vector<double>& knots, int spacing, std::size_t length) {
    if (knots.empty()) throw std::invalid_argument("spline_upsample: no knots");
    if (spacing < 1) throw std::invalid_argument("spline_upsample: spacing must be positive");
    std::vector<double> out(length);
    const std::size_t n = knots.size();
    if (n == 1) {
        std::fill(out.begin(), out.end(), knots[0]);
        return out;
    }
    const double h = spacing;
    const auto m = not_a_knot_curvature(knots, h);
    for (std::size_t x = 0; x < length; ++x) {
        const std::size_t i = std::min(x / static_cast<std::size_t>(spacing), n - 2);
        const double a = static_cast<double>(i + 1) * h - static_cast<double>(x);  // x_{i+1} - x
        const double b = static_cast<double>(x) - static_cast<double>(i) * h;      // x - x_i
        out[x] = m[i] * a * a * a / (6.0 * h) + m[i + 1] * b * b * b / (6.0 * h) +
                 (knots[i] / h - m[i] * h / 6.0) * a + (knots[i + 1] / h - m[i + 1] * h / 6.0) * b;
    }
    return out;
}

Waveform prepare_narrowband(const Waveform& w, int factor) {
    if (factor != 2 && factor != 4)
        throw std::invalid_argument("prepare_narrowband: factor must be 2 or 4, got " + std::to_string(factor));
    validate(w);
    if (w.empty()) return w;
    std::vector<double> knots;
    for (std::size_t i = 0; i < w.size(); i += static_cast<std::size_t>(factor)) knots.push_back(w.samples[i]);
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples = spline_upsample(knots, factor, w.size());
    return out;
}

}  // namespace mpse
