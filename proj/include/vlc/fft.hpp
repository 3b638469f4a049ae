// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "vlc/error.hpp"

namespace vlc {

namespace detail {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans are made once per (size, direction) under a lock.
class FftPlans {
public:
    static FftPlans& instance()
    {
        static FftPlans p;
        return p;
    }

    fftw_plan get(int n, int sign)
    {
        std::lock_guard lock(mu_);
        auto it = plans_.find({n, sign});
        if (it != plans_.end())
            return it->second;
        auto* in = fftw_alloc_complex(static_cast<std::size_t>(n));
        auto* out = fftw_alloc_complex(static_cast<std::size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        require(p != nullptr, ErrorKind::invalid_state, "FFTW could not plan a transform");
        plans_.emplace(std::pair{n, sign}, p);
        return p;
    }

    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

private:
    FftPlans() = default;
    ~FftPlans()
    {
        for (auto& [k, p] : plans_)
            fftw_destroy_plan(p);
    }
    std::mutex mu_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline std::vector<std::complex<double>> run_fft(std::span<const std::complex<double>> x, int sign)
{
    const int n = static_cast<int>(x.size());
    require(n > 0, ErrorKind::invalid_input, "empty transform");
    fftw_plan p = FftPlans::instance().get(n, sign);
    auto* in = fftw_alloc_complex(static_cast<std::size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        in[i][0] = x[static_cast<std::size_t>(i)].real();
        in[i][1] = x[static_cast<std::size_t>(i)].imag();
    }
    fftw_execute_dft(p, in, out);
    std::vector<std::complex<double>> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] = {out[i][0], out[i][1]};
    fftw_free(in);
    fftw_free(out);
    return y;
}

} // namespace detail

/// Unnormalized forward transform, X[k] = sum x[n] e^{-2 pi i kn/N}.
inline std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x)
{
    return detail::run_fft(x, FFTW_FORWARD);
}

/// Unnormalized inverse, x[n] = sum X[k] e^{+2 pi i kn/N}.
inline std::vector<std::complex<double>> ifft_unnormalized(std::span<const std::complex<double>> x)
{
    return detail::run_fft(x, FFTW_BACKWARD);
}

} // namespace vlc
