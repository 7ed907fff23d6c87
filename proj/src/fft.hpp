#pragma once

#include <complex>
#include <span>

namespace mpse::detail {

// Real <-> half-complex transform of fixed size n. Each instance owns its plan and
// buffers, so separate instances may run concurrently.
class RealFft {
public:
    explicit RealFft(int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const noexcept { return n_; }

    // in.size() == n, out.size() == n/2+1. Unnormalized.
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    // in.size() == n/2+1, out.size() == n. Normalized by 1/n.
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    int n_;
    double* real_ = nullptr;
    void* spec_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

}  // namespace mpse::detail
