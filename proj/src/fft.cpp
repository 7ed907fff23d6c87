#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <new>

namespace mpse::detail {

namespace {
// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFft::RealFft(int n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    real_ = fftw_alloc_real(static_cast<std::size_t>(n));
    auto* spec = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    spec_ = spec;
    if (!real_ || !spec) throw std::bad_alloc();
    forward_plan_ = fftw_plan_dft_r2c_1d(n, real_, spec, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(n, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(real_);
    fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    const auto* spec = static_cast<const fftw_complex*>(spec_);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {spec[k][0], spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* spec = static_cast<fftw_complex*>(spec_);
    for (std::size_t k = 0; k < in.size(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const double scale = 1.0 / n_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_[i] * scale;
}

}  // namespace mpse::detail
