#ifndef MDCORNER_FFT_HPP
#define MDCORNER_FFT_HPP

#include <algorithm>
#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <fftw3.h>

namespace mdc::fft {

using cplx = std::complex<double>;

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per shape under a lock and live for the process.
namespace detail {

enum class PlanKind { C2C, R2C2D, C2R2D };

inline std::mutex& plan_mutex()
{
    static std::mutex m;
    return m;
}

inline fftw_plan get_plan(PlanKind kind, int n0, int n1, int sign)
{
    static std::map<std::tuple<int, int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(plan_mutex());
    const auto key = std::make_tuple(int(kind), n0, n1, sign);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    if (kind == PlanKind::C2C) {
        auto* buf = fftw_alloc_complex(std::size_t(n0));
        plan = fftw_plan_dft_1d(n0, buf, buf, sign, flags);
        fftw_free(buf);
    } else {
        const std::size_t nc = std::size_t(n0) * (n1 / 2 + 1);
        auto* real = fftw_alloc_real(std::size_t(n0) * n1);
        auto* spec = fftw_alloc_complex(nc);
        plan = kind == PlanKind::R2C2D ? fftw_plan_dft_r2c_2d(n0, n1, real, spec, flags)
                                       : fftw_plan_dft_c2r_2d(n0, n1, spec, real, flags);
        fftw_free(real);
        fftw_free(spec);
    }
    if (!plan) throw std::runtime_error("FFTW plan creation failed");
    cache.emplace(key, plan);
    return plan;
}

}  // namespace detail

/// Unnormalized 1-D DFT, out-of-place (in == out allowed). sign = -1 forward.
inline void dft(const cplx* in, cplx* out, int n, int sign = FFTW_FORWARD)
{
    // cached plans are in-place
    fftw_plan plan = detail::get_plan(detail::PlanKind::C2C, n, 0, sign);
    if (in != out) std::memcpy(static_cast<void*>(out), in, sizeof(cplx) * std::size_t(n));
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(out), reinterpret_cast<fftw_complex*>(out));
}

inline std::vector<cplx> dft(std::vector<cplx> x, int sign = FFTW_FORWARD)
{
    dft(x.data(), x.data(), int(x.size()), sign);
    return x;
}

/// Half-spectrum of a row-major real n0 x n1 array: n0 x (n1/2+1).
inline std::vector<cplx> rdft2(const std::vector<double>& in, int n0, int n1)
{
    if (in.size() != std::size_t(n0) * n1) throw std::invalid_argument("rdft2: size mismatch");
    std::vector<double> work(in);
    std::vector<cplx> out(std::size_t(n0) * (n1 / 2 + 1));
    fftw_execute_dft_r2c(detail::get_plan(detail::PlanKind::R2C2D, n0, n1, 0), work.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

/// Unnormalized inverse of rdft2 (multiply by 1/(n0*n1) to invert).
inline std::vector<double> irdft2(const std::vector<cplx>& in, int n0, int n1)
{
    std::vector<cplx> work(in);  // c2r overwrites its input
    std::vector<double> out(std::size_t(n0) * n1);
    fftw_execute_dft_c2r(detail::get_plan(detail::PlanKind::C2R2D, n0, n1, 0),
                         reinterpret_cast<fftw_complex*>(work.data()), out.data());
    return out;
}

/// Smallest n' >= n whose prime factors are 2, 3, 5 or 7.
inline int good_size(int n)
{
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

}  // namespace mdc::fft

#endif  // MDCORNER_FFT_HPP
