#include "mpse/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mpse/losses.hpp"
#include "mpse/phase.hpp"
#include "mpse/spectral.hpp"

namespace mpse {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFdStep = 1e-6;

class Checks {
public:
    explicit Checks(double scale) : scale_(scale) {}

    void add(std::string name, double measured, double tolerance) {
        const double tol = tolerance * scale_;
        const bool ok = tol == 0.0 ? measured == 0.0 : measured < tol;
        out_.push_back({std::move(name), measured, tol, ok});
    }
    std::vector<VerifyCheck> take() { return std::move(out_); }

private:
    double scale_;
    std::vector<VerifyCheck> out_;
};

RealGrid random_grid(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    RealGrid g(rows, cols);
    for (double& v : g) v = u(rng);
    return g;
}

std::vector<VerifyCheck> roundtrip(const VerifyOptions& opt) {
    Checks checks(opt.tolerance_scale);
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> len(1600, 48000);
    std::normal_distribution<double> n01(0.0, 1.0);
    const StftConfig cfg;

    double worst = 0.0, worst_linear = 0.0;
    for (int i = 0; i < opt.points; ++i) {
        Waveform w;
        w.samples.resize(len(rng));
        for (double& s : w.samples) s = n01(rng);
        const Waveform back = istft(stft(w, cfg), cfg, w.size());
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            num += (back.samples[k] - w.samples[k]) * (back.samples[k] - w.samples[k]);
            den += w.samples[k] * w.samples[k];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    checks.add("stft/istft relative L2 error", worst, 1e-10);

    // linearity on a pair of fixed-length signals
    for (int i = 0; i < 5; ++i) {
        Waveform a, b, mix;
        a.samples.resize(4000);
        b.samples.resize(4000);
        for (double& s : a.samples) s = n01(rng);
        for (double& s : b.samples) s = n01(rng);
        const double ca = n01(rng), cb = n01(rng);
        mix.samples.resize(4000);
        for (std::size_t k = 0; k < 4000; ++k) mix.samples[k] = ca * a.samples[k] + cb * b.samples[k];
        const auto sa = stft(a, cfg), sb = stft(b, cfg), sm = stft(mix, cfg);
        for (std::size_t k = 0; k < sm.size(); ++k)
            worst_linear = std::max(worst_linear, std::abs(sm[k] - (ca * sa[k] + cb * sb[k])));
    }
    checks.add("stft linearity max abs error", worst_linear, 1e-10);
    return checks.take();
}

std::vector<VerifyCheck> gradcheck(const VerifyOptions& opt) {
    Checks checks(opt.tolerance_scale);
    std::mt19937_64 rng(opt.seed);
    const std::size_t T = 4, F = 5;

    double worst_mag = 0.0;
    for (int i = 0; i < opt.points; ++i) {
        const RealGrid target = random_grid(rng, T, F, 0.0, 2.0);
        const RealGrid start = random_grid(rng, T, F, 0.0, 2.0);
        const Objective f = [&](std::span<const double> x, std::vector<double>* g) {
            const auto r = loss_magnitude(target, RealGrid(T, F, std::vector<double>(x.begin(), x.end())));
            if (g) *g = r.grad.values();
            return r.value;
        };
        worst_mag = std::max(worst_mag, fd_gradient_check(f, start.values(), kFdStep));
    }
    checks.add("magnitude loss gradient", worst_mag, 1e-4);

    double worst_pha = 0.0;
    for (int i = 0; i < opt.points; ++i) {
        RealGrid target, start;
        do {
            target = random_grid(rng, T, F, -kPi, kPi);
            start = random_grid(rng, T, F, -kPi, kPi);
        } while (phase_kink_margin(target, start) <= 10.0 * kFdStep);
        const Objective f = [&](std::span<const double> x, std::vector<double>* g) {
            const auto r = loss_phase(target, RealGrid(T, F, std::vector<double>(x.begin(), x.end())));
            if (g) *g = r.grad.values();
            return r.total();
        };
        worst_pha = std::max(worst_pha, fd_gradient_check(f, start.values(), kFdStep));
    }
    checks.add("phase loss gradient", worst_pha, 1e-4);

    double worst_com = 0.0;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < opt.points; ++i) {
        ComplexSpectrum target(T, F);
        for (auto& z : target) z = {n01(rng), n01(rng)};
        const RealGrid mag = random_grid(rng, T, F, 0.1, 2.0);
        const RealGrid pha = random_grid(rng, T, F, -kPi, kPi);
        std::vector<double> point = mag.values();
        point.insert(point.end(), pha.begin(), pha.end());
        const std::size_t n = T * F;
        const Objective f = [&](std::span<const double> x, std::vector<double>* g) {
            const RealGrid m(T, F, std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)));
            const RealGrid p(T, F, std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(n), x.end()));
            const auto r = loss_complex(target, m, p);
            if (g) {
                *g = r.grad_mag.values();
                g->insert(g->end(), r.grad_phase.begin(), r.grad_phase.end());
            }
            return r.value;
        };
        worst_com = std::max(worst_com, fd_gradient_check(f, point, kFdStep));
    }
    checks.add("complex loss gradient", worst_com, 1e-4);
    return checks.take();
}

std::vector<VerifyCheck> invariants(const VerifyOptions& opt) {
    Checks checks(opt.tolerance_scale);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(-50.0, 50.0);

    double periodic = 0.0, even = 0.0, range = 0.0;
    const int samples = opt.points * 1000;
    for (int i = 0; i < samples; ++i) {
        const double t = u(rng);
        const double base = anti_wrap(t);
        for (int k = -5; k <= 5; ++k) periodic = std::max(periodic, std::abs(anti_wrap(t + 2.0 * kPi * k) - base));
        even = std::max(even, std::abs(anti_wrap(-t) - base));
        if (base < 0.0) range = std::max(range, -base);
        if (base > kPi) range = std::max(range, base - kPi);
    }
    checks.add("anti_wrap periodicity", periodic, 1e-9);
    checks.add("anti_wrap evenness", even, 0.0);
    checks.add("anti_wrap range excess", range, 0.0);

    const std::size_t T = 6, F = 7;
    double zero_err = 0.0, shift_err = 0.0, offset_err = 0.0, ip_offset = kPi;
    for (int i = 0; i < opt.points; ++i) {
        const RealGrid target = random_grid(rng, T, F, -kPi, kPi);
        const RealGrid est = random_grid(rng, T, F, -kPi, kPi);
        const auto same = loss_phase(target, target);
        zero_err = std::max(zero_err, same.total());

        RealGrid shifted = est;
        std::uniform_int_distribution<int> kd(-3, 3);
        for (double& v : shifted) v += 2.0 * kPi * kd(rng);
        shift_err = std::max(shift_err, std::abs(loss_phase(target, shifted).total() - loss_phase(target, est).total()));

        RealGrid offset = est;
        for (double& v : offset) v += 0.7;
        const auto a = loss_phase(target, est), b = loss_phase(target, offset);
        offset_err = std::max({offset_err, std::abs(a.gd - b.gd), std::abs(a.iaf - b.iaf)});
        ip_offset = std::min(ip_offset, std::abs(a.ip - b.ip));
    }
    checks.add("phase loss at ground truth", zero_err, 1e-15);
    checks.add("phase loss under 2*pi*k shifts", shift_err, 1e-12);
    checks.add("GD/IAF loss under global offset", offset_err, 1e-12);
    // the instantaneous term must move under a global offset
    checks.add("IP loss insensitivity to offset (expect > 0)", ip_offset > 0.0 ? 0.0 : 1.0, 0.0);

    const StftConfig cfg;
    std::normal_distribution<double> n01(0.0, 1.0);
    double con = 0.0;
    for (int i = 0; i < 5; ++i) {
        Waveform w;
        w.samples.resize(3200);
        for (double& s : w.samples) s = n01(rng);
        const auto [m, p] = mag_phase(stft(w, cfg));
        con = std::max(con, loss_consistency(m, p, cfg));
    }
    checks.add("consistency loss on consistent spectra", con, 1e-12);
    return checks.take();
}

}  // namespace

VerifySuite parse_verify_suite(const std::string& name) {
    if (name == "roundtrip") return VerifySuite::roundtrip;
    if (name == "gradcheck") return VerifySuite::gradcheck;
    if (name == "invariants") return VerifySuite::invariants;
    throw std::invalid_argument("unknown verify suite '" + name + "'");
}

std::string to_string(VerifySuite suite) {
    switch (suite) {
        case VerifySuite::roundtrip: return "roundtrip";
        case VerifySuite::gradcheck: return "gradcheck";
        case VerifySuite::invariants: return "invariants";
    }
    return "unknown";
}

std::vector<VerifyCheck> run_suite(VerifySuite suite, const VerifyOptions& options) {
    switch (suite) {
        case VerifySuite::roundtrip: return roundtrip(options);
        case VerifySuite::gradcheck: return gradcheck(options);
        case VerifySuite::invariants: return invariants(options);
    }
    throw std::invalid_argument("unknown verify suite");
}

}  // namespace mpse
