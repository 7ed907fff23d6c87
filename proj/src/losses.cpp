#include "mpse/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mpse/phase.hpp"

namespace mpse {

namespace {

// Mean of anti_wrap over a difference grid, accumulating d(mean)/d(diff) into slope.
double mean_anti_wrap(const RealGrid& diff, RealGrid& slope) {
    const double n = static_cast<double>(diff.size());
    slope = RealGrid(diff.rows(), diff.cols());
    double acc = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        acc += anti_wrap(diff[i]);
        slope[i] = anti_wrap_slope(diff[i]) / n;
    }
    return acc / n;
}

double kink_distance(double t) { return std::abs(std::remainder(t, std::numbers::pi)); }

void append(std::ostringstream& os, const char* name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << name << '=' << buf << '\n';
}

}  // namespace

LossGradient loss_magnitude(const MagnitudeSpectrum& target_c, const MagnitudeSpectrum& estimate_c) {
    require_same_shape(target_c, estimate_c, "loss_magnitude");
    LossGradient out{0.0, RealGrid(target_c.rows(), target_c.cols())};
    if (target_c.empty()) return out;
    const double n = static_cast<double>(target_c.size());
    for (std::size_t i = 0; i < target_c.size(); ++i) {
        const double d = target_c[i] - estimate_c[i];
        out.value += d * d;
        out.grad[i] = -2.0 * d / n;
    }
    out.value /= n;
    return out;
}

PhaseLoss loss_phase(const PhaseSpectrum& target, const PhaseSpectrum& estimate) {
    require_same_shape(target, estimate, "loss_phase");
    if (target.rows() < 2 || target.cols() < 2)
        throw std::invalid_argument("loss_phase: need at least 2 frames and 2 bins");

    RealGrid err(target.rows(), target.cols());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = target[i] - estimate[i];

    PhaseLoss out;
    RealGrid s_ip, s_gd, s_iaf;
    out.ip = mean_anti_wrap(err, s_ip);
    out.gd = mean_anti_wrap(diff_freq(err).values, s_gd);
    out.iaf = mean_anti_wrap(diff_time(err).values, s_iaf);

    // Accumulate d/d(err), then flip sign since err = target - estimate.
    RealGrid g = s_ip;
    for (std::size_t t = 0; t < s_gd.rows(); ++t)
        for (std::size_t f = 0; f < s_gd.cols(); ++f) {
            g(t, f + 1) += s_gd(t, f);
            g(t, f) -= s_gd(t, f);
        }
    for (std::size_t t = 0; t < s_iaf.rows(); ++t)
        for (std::size_t f = 0; f < s_iaf.cols(); ++f) {
            g(t + 1, f) += s_iaf(t, f);
            g(t, f) -= s_iaf(t, f);
        }
    for (double& v : g) v = -v;
    out.grad = std::move(g);
    return out;
}

ComplexLoss loss_complex(const ComplexSpectrum& target, const MagnitudeSpectrum& est_mag,
                         const PhaseSpectrum& est_phase) {
    require_same_shape(target, est_mag, "loss_complex");
    require_same_shape(est_mag, est_phase, "loss_complex");
    ComplexLoss out{0.0, RealGrid(est_mag.rows(), est_mag.cols()), RealGrid(est_mag.rows(), est_mag.cols())};
    if (target.empty()) return out;
    const double n = static_cast<double>(target.size());
    double re_acc = 0.0, im_acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double m = est_mag[i];
        const double c = std::cos(est_phase[i]);
        const double s = std::sin(est_phase[i]);
        const double dr = target[i].real() - m * c;
        const double di = target[i].imag() - m * s;
        re_acc += dr * dr;
        im_acc += di * di;
        out.grad_mag[i] = -2.0 * (dr * c + di * s) / n;
        out.grad_phase[i] = -2.0 * (-dr * m * s + di * m * c) / n;
    }
    out.value = re_acc / n + im_acc / n;
    return out;
}

double loss_consistency(const MagnitudeSpectrum& est_mag, const PhaseSpectrum& est_phase, const StftConfig& cfg) {
    require_same_shape(est_mag, est_phase, "loss_consistency");
    if (est_mag.cols() != static_cast<std::size_t>(cfg.bins()))
        throw std::invalid_argument("loss_consistency: spectrum bins do not match the STFT config");
    const ComplexSpectrum s = polar(est_mag, est_phase);
    const ComplexSpectrum p = consistency_project(s, cfg);
    if (!p.same_shape(s)) throw std::invalid_argument("loss_consistency: projection changed the frame count");
    const double n = static_cast<double>(s.size());
    double re_acc = 0.0, im_acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto d = s[i] - p[i];
        re_acc += d.real() * d.real();
        im_acc += d.imag() * d.imag();
    }
    return re_acc / n + im_acc / n;
}

Discriminator make_quality_oracle(Discriminator raw) {
    return [raw = std::move(raw)](const Waveform& ref, const Waveform& est) {
        const double q = raw(ref, est);
        if (std::isnan(q)) throw std::domain_error("quality oracle returned NaN");
        return std::clamp(q, 0.0, 1.0);
    };
}

double scale_pesq(double pesq) noexcept { return std::clamp((pesq + 0.5) / 5.0, 0.0, 1.0); }

Discriminator constant_discriminator(double score) {
    return [score](const Waveform&, const Waveform&) { return score; };
}

double loss_discriminator(const Discriminator& d, const Waveform& clean, const Waveform& enhanced, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("loss_discriminator: quality target must lie in [0, 1]");
    const double real = d(clean, clean) - 1.0;
    const double fake = d(clean, enhanced) - q;
    return real * real + fake * fake;
}

double loss_metric(const Discriminator& d, const Waveform& clean, const Waveform& enhanced) {
    const double e = d(clean, enhanced) - 1.0;
    return e * e;
}

LossReport loss_generator_total(const ComponentLosses& parts, const LossWeights& w) {
    LossReport r;
    r.mag = parts.mag;
    r.ip = parts.ip;
    r.gd = parts.gd;
    r.iaf = parts.iaf;
    r.pha = parts.ip + parts.gd + parts.iaf;
    r.com = parts.com;
    r.con = parts.con;
    r.metric = parts.metric;
    // extended precision so the weighted sum is rounded once
    using ld = long double;
    r.total = static_cast<double>(ld(w.mag) * r.mag + ld(w.pha) * r.pha + ld(w.com) * r.com + ld(w.con) * r.con +
                                  ld(w.metric) * r.metric);
    return r;
}

LossReport generator_losses(const ComplexSpectrum& target, const SpectralEstimate& estimate, const StftConfig& cfg,
                            const LossWeights& weights, double metric_loss) {
    require_same_shape(target, estimate.mag_c, "generator_losses");
    require_same_shape(target, estimate.phase, "generator_losses");
    const double c = cfg.compression_factor;

    const auto [target_mag, target_phase] = mag_phase(target);
    const MagnitudeSpectrum target_c = compress(target_mag, c);
    const MagnitudeSpectrum est_mag = decompress(estimate.mag_c, c);

    const LossGradient mag = loss_magnitude(target_c, estimate.mag_c);
    const PhaseLoss pha = loss_phase(target_phase, estimate.phase);
    const ComplexLoss com = loss_complex(target, est_mag, estimate.phase);
    const double con = loss_consistency(est_mag, estimate.phase, cfg);

    LossReport r = loss_generator_total({mag.value, pha.ip, pha.gd, pha.iaf, com.value, con, metric_loss}, weights);

    // d(mag)/d(mag_c) = (1/c) * mag_c^(1/c - 1)
    RealGrid g_mag(target.rows(), target.cols()), g_pha(target.rows(), target.cols());
    for (std::size_t i = 0; i < g_mag.size(); ++i) {
        const double dm_dmc = std::pow(estimate.mag_c[i], 1.0 / c - 1.0) / c;
        g_mag[i] = weights.mag * mag.grad[i] + weights.com * com.grad_mag[i] * dm_dmc;
        g_pha[i] = weights.pha * pha.grad[i] + weights.com * com.grad_phase[i];
    }
    r.grad_mag_c = std::move(g_mag);
    r.grad_phase = std::move(g_pha);
    return r;
}

std::string to_text(const LossReport& r) {
    std::ostringstream os;
    append(os, "mag", r.mag);
    append(os, "ip", r.ip);
    append(os, "gd", r.gd);
    append(os, "iaf", r.iaf);
    append(os, "pha", r.pha);
    append(os, "com", r.com);
    append(os, "con", r.con);
    append(os, "metric", r.metric);
    append(os, "total", r.total);
    return os.str();
}

LossReport parse_loss_report(std::string_view text) {
    LossReport r;
    const std::pair<const char*, double*> fields[] = {{"mag", &r.mag}, {"ip", &r.ip},   {"gd", &r.gd},
                                                      {"iaf", &r.iaf}, {"pha", &r.pha}, {"com", &r.com},
                                                      {"con", &r.con}, {"metric", &r.metric}, {"total", &r.total}};
    std::size_t seen = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("loss report: expected name=value");
        const std::string_view key = line.substr(0, eq);
        const std::string_view val = line.substr(eq + 1);
        auto it = std::find_if(std::begin(fields), std::end(fields), [&](const auto& f) { return key == f.first; });
        if (it == std::end(fields)) throw std::invalid_argument("loss report: unknown key " + std::string(key));
        double v = 0.0;
        const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
        if (res.ec != std::errc{} || res.ptr != val.data() + val.size())
            throw std::invalid_argument("loss report: bad value for " + std::string(key));
        *it->second = v;
        ++seen;
    }
    if (seen != std::size(fields)) throw std::invalid_argument("loss report: missing keys");
    return r;
}

double fd_gradient_check(const Objective& f, std::span<const double> point, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_gradient_check: step must be positive");
    std::vector<double> analytic(point.size(), 0.0);
    f(point, &analytic);
    if (analytic.size() != point.size()) throw std::invalid_argument("fd_gradient_check: gradient size mismatch");

    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double up = f(x, nullptr);
        x[i] = x0 - h;
        const double down = f(x, nullptr);
        x[i] = x0;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

double phase_kink_margin(const PhaseSpectrum& target, const PhaseSpectrum& estimate) {
    require_same_shape(target, estimate, "phase_kink_margin");
    RealGrid err(target.rows(), target.cols());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = target[i] - estimate[i];
    double margin = std::numeric_limits<double>::infinity();
    for (double v : err) margin = std::min(margin, kink_distance(v));
    if (err.cols() >= 2)
        for (double v : diff_freq(err).values) margin = std::min(margin, kink_distance(v));
    if (err.rows() >= 2)
        for (double v : diff_time(err).values) margin = std::min(margin, kink_distance(v));
    return margin;
}

}  // namespace mpse
