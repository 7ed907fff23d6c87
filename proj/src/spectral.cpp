#include "mpse/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fft.hpp"

namespace mpse {

namespace {

// Smallest squared-window envelope treated as covered by at least one frame.
constexpr double kEnvelopeFloor = 1e-11;

int pad_of(const StftConfig& cfg) { return cfg.center ? cfg.n_fft / 2 : 0; }

std::vector<double> reflect_pad(std::span<const double> x, int pad) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out(x.size() + 2 * static_cast<std::size_t>(pad));
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.size()); ++i) {
        std::ptrdiff_t j = i - pad;
        if (j < 0) j = -j;
        if (j >= n) j = 2 * (n - 1) - j;
        out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(j)];
    }
    return out;
}

void check_magnitude(const MagnitudeSpectrum& m, const char* what) {
    for (double v : m)
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": magnitude must be non-negative");
}

void check_factor(double c) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("compression factor must lie in (0, 1]");
}

}  // namespace

int StftConfig::frames(std::size_t length) const {
    const auto padded = static_cast<long long>(length) + 2LL * pad_of(*this);
    if (padded < n_fft) return 0;
    return static_cast<int>((padded - n_fft) / hop_length + 1);
}

void validate(const StftConfig& cfg) {
    if (cfg.n_fft < 2) throw std::invalid_argument("n_fft must be at least 2");
    if (cfg.hop_length < 1) throw std::invalid_argument("hop_length must be positive");
    if (!(cfg.hop_length <= cfg.win_length && cfg.win_length <= cfg.n_fft))
        throw std::invalid_argument("require hop_length <= win_length <= n_fft");
    check_factor(cfg.compression_factor);
    if (cola_deviation(cfg) > 1e-10)
        throw std::invalid_argument("squared window does not satisfy constant overlap-add for this hop");
}

std::vector<double> analysis_window(const StftConfig& cfg) {
    std::vector<double> w(static_cast<std::size_t>(cfg.n_fft), 0.0);
    const int offset = (cfg.n_fft - cfg.win_length) / 2;
    for (int n = 0; n < cfg.win_length; ++n)
        w[static_cast<std::size_t>(offset + n)] =
            0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.win_length);
    return w;
}

double cola_deviation(const StftConfig& cfg) {
    const auto w = analysis_window(cfg);
    std::vector<double> sum(static_cast<std::size_t>(cfg.hop_length), 0.0);
    for (std::size_t n = 0; n < w.size(); ++n) sum[n % static_cast<std::size_t>(cfg.hop_length)] += w[n] * w[n];
    const auto [lo, hi] = std::minmax_element(sum.begin(), sum.end());
    double mean = 0.0;
    for (double s : sum) mean += s;
    mean /= static_cast<double>(sum.size());
    if (mean <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(*hi - mean, mean - *lo) / mean;
}

ComplexSpectrum stft(const Waveform& w, const StftConfig& cfg) {
    validate(w);
    return stft(std::span<const double>(w.samples), cfg);
}

ComplexSpectrum stft(std::span<const double> samples, const StftConfig& cfg) {
    validate(cfg);
    if (samples.empty()) throw std::invalid_argument("input too short: empty waveform");
    const int pad = pad_of(cfg);
    if (cfg.center && samples.size() <= static_cast<std::size_t>(pad))
        throw std::invalid_argument("input too short: " + std::to_string(samples.size()) +
                                    " samples cannot be reflect-padded by " + std::to_string(pad));
    const int frames = cfg.frames(samples.size());
    if (frames < 1) throw std::invalid_argument("input too short: no complete analysis frame");

    const std::vector<double> padded =
        cfg.center ? reflect_pad(samples, pad) : std::vector<double>(samples.begin(), samples.end());
    const auto window = analysis_window(cfg);
    const auto n_fft = static_cast<std::size_t>(cfg.n_fft);

    ComplexSpectrum out(static_cast<std::size_t>(frames), static_cast<std::size_t>(cfg.bins()));
    detail::RealFft fft(cfg.n_fft);
    std::vector<double> frame(n_fft);
    for (std::size_t t = 0; t < out.rows(); ++t) {
        const std::size_t start = t * static_cast<std::size_t>(cfg.hop_length);
        for (std::size_t n = 0; n < n_fft; ++n) frame[n] = padded[start + n] * window[n];
        fft.forward(frame, out.row(t));
    }
    return out;
}

Waveform istft(const ComplexSpectrum& spec, const StftConfig& cfg, std::size_t out_len) {
    validate(cfg);
    if (spec.cols() != static_cast<std::size_t>(cfg.bins()))
        throw std::invalid_argument("istft: spectrum has " + std::to_string(spec.cols()) + " bins, config expects " +
                                    std::to_string(cfg.bins()));
    Waveform out;
    out.samples.assign(out_len, 0.0);
    if (spec.rows() == 0) return out;

    const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
    const auto hop = static_cast<std::size_t>(cfg.hop_length);
    const std::size_t total = n_fft + hop * (spec.rows() - 1);
    std::vector<double> acc(total, 0.0), envelope(total, 0.0), frame(n_fft);
    const auto window = analysis_window(cfg);

    detail::RealFft fft(cfg.n_fft);
    for (std::size_t t = 0; t < spec.rows(); ++t) {
        fft.inverse(spec.row(t), frame);
        const std::size_t start = t * hop;
        for (std::size_t n = 0; n < n_fft; ++n) {
            acc[start + n] += frame[n] * window[n];
            envelope[start + n] += window[n] * window[n];
        }
    }

    const auto pad = static_cast<std::size_t>(pad_of(cfg));
    for (std::size_t i = 0; i < out_len && i + pad < total; ++i) {
        const double env = envelope[i + pad];
        out.samples[i] = env > kEnvelopeFloor ? acc[i + pad] / env : 0.0;
    }
    return out;
}

std::pair<MagnitudeSpectrum, PhaseSpectrum> mag_phase(const ComplexSpectrum& spec) {
    MagnitudeSpectrum mag(spec.rows(), spec.cols());
    PhaseSpectrum phase(spec.rows(), spec.cols());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto z = spec[i];
        mag[i] = std::abs(z);
        if (z.real() == 0.0 && z.imag() == 0.0) {
            phase[i] = 0.0;
        } else {
            const double a = std::atan2(z.imag(), z.real());
            // atan2(-0, x<0) yields -pi; keep the principal range (-pi, pi]
            phase[i] = a == -std::numbers::pi ? std::numbers::pi : a;
        }
    }
    return {std::move(mag), std::move(phase)};
}

ComplexSpectrum polar(const MagnitudeSpectrum& mag, const PhaseSpectrum& phase) {
    require_same_shape(mag, phase, "polar");
    ComplexSpectrum out(mag.rows(), mag.cols());
    for (std::size_t i = 0; i < mag.size(); ++i) out[i] = {mag[i] * std::cos(phase[i]), mag[i] * std::sin(phase[i])};
    return out;
}

MagnitudeSpectrum compress(const MagnitudeSpectrum& mag, double c) {
    check_factor(c);
    check_magnitude(mag, "compress");
    MagnitudeSpectrum out(mag.rows(), mag.cols());
    for (std::size_t i = 0; i < mag.size(); ++i) out[i] = std::pow(mag[i], c);
    return out;
}

MagnitudeSpectrum decompress(const MagnitudeSpectrum& mag, double c) {
    check_factor(c);
    check_magnitude(mag, "decompress");
    MagnitudeSpectrum out(mag.rows(), mag.cols());
    const double inv = 1.0 / c;
    for (std::size_t i = 0; i < mag.size(); ++i) out[i] = std::pow(mag[i], inv);
    return out;
}

ComplexSpectrum consistency_project(const ComplexSpectrum& spec, const StftConfig& cfg) {
    if (spec.rows() == 0) return spec;
    const std::size_t hop = static_cast<std::size_t>(cfg.hop_length);
    const std::size_t length =
        cfg.center ? hop * (spec.rows() - 1) : static_cast<std::size_t>(cfg.n_fft) + hop * (spec.rows() - 1);
    const Waveform w = istft(spec, cfg, length);
    return stft(w, cfg);
}

}  // namespace mpse
