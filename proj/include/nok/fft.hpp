#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "nok/errors.hpp"

namespace nok::detail {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform, unnormalized.
/// sign = +1 evaluates sum_j x_j exp(+2*pi*i*j*k/n), sign = -1 the conjugate.
inline void fft_radix2(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw IntegrityError("fft_radix2 requires a power-of-two length");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j];
                cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

/// Unnormalized DFT of arbitrary length via Bluestein's chirp-z reduction
/// to a power-of-two convolution. O(n log n) for any n, primes included.
class Dft {
  public:
    explicit Dft(std::size_t n) : n_(n) {
        if (n == 0) throw IntegrityError("Dft of empty sequence");
        if (is_power_of_two(n)) return;
        conv_len_ = 1;
        while (conv_len_ < 2 * n - 1) conv_len_ <<= 1;
        // chirp_[j] = exp(+pi*i*j^2/n); j^2 reduced mod 2n keeps the angle small.
        chirp_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t q = (j * j) % (2 * n);
            const double ang = std::numbers::pi * static_cast<double>(q) / static_cast<double>(n);
            chirp_[j] = cplx(std::cos(ang), std::sin(ang));
        }
        kernel_fwd_.assign(conv_len_, cplx(0, 0));
        kernel_bwd_.assign(conv_len_, cplx(0, 0));
        for (std::size_t j = 0; j < n; ++j) {
            kernel_fwd_[j] = chirp_[j];
            if (j > 0) kernel_fwd_[conv_len_ - j] = chirp_[j];
            kernel_bwd_[j] = std::conj(chirp_[j]);
            if (j > 0) kernel_bwd_[conv_len_ - j] = std::conj(chirp_[j]);
        }
        fft_radix2(kernel_fwd_, -1);
        fft_radix2(kernel_bwd_, -1);
    }

    std::size_t size() const { return n_; }

    /// out_k = sum_j in_j exp(sign*2*pi*i*j*k/n), unnormalized.
    std::vector<cplx> transform(const std::vector<cplx>& in, int sign) const {
        if (in.size() != n_) throw IntegrityError("Dft length mismatch");
        if (is_power_of_two(n_)) {
            std::vector<cplx> a = in;
            fft_radix2(a, sign);
            return a;
        }
        // Bluestein: x_j*exp(s*pi*i*j^2/n) convolved with exp(-s*pi*i*t^2/n).
        std::vector<cplx> a(conv_len_, cplx(0, 0));
        const bool fwd = sign > 0;
        for (std::size_t j = 0; j < n_; ++j)
            a[j] = in[j] * (fwd ? chirp_[j] : std::conj(chirp_[j]));
        fft_radix2(a, -1);
        const std::vector<cplx>& kern = fwd ? kernel_bwd_ : kernel_fwd_;
        for (std::size_t j = 0; j < conv_len_; ++j) a[j] *= kern[j];
        fft_radix2(a, +1);
        const double scale = 1.0 / static_cast<double>(conv_len_);
        std::vector<cplx> out(n_);
        for (std::size_t k = 0; k < n_; ++k)
            out[k] = a[k] * scale * (fwd ? chirp_[k] : std::conj(chirp_[k]));
        return out;
    }

  private:
    std::size_t n_;
    std::size_t conv_len_ = 0;
    std::vector<cplx> chirp_;
    std::vector<cplx> kernel_fwd_;   // FFT of exp(+pi*i*t^2/n) kernel
    std::vector<cplx> kernel_bwd_;   // FFT of exp(-pi*i*t^2/n) kernel
};

}  // namespace nok::detail
