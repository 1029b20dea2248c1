#include "biatt/kernels.hpp"

#include <cmath>
#include <numbers>

namespace biatt::kernels {

namespace ref {

void matvec(const Tensor& W, const double* x, double* out) {
    const int m = W.rows, n = W.cols;
    for (int r = 0; r < m; ++r) {
        const double* row = W.v.data() + static_cast<std::size_t>(r) * n;
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

void matvec_transposed(const Tensor& W, const double* y, double* out) {
    const int m = W.rows, n = W.cols;
    for (int c = 0; c < n; ++c) out[c] = 0.0;
    for (int r = 0; r < m; ++r) {
        const double* row = W.v.data() + static_cast<std::size_t>(r) * n;
        const double yr = y[r];
        for (int c = 0; c < n; ++c) out[c] += yr * row[c];
    }
}

void outer_accumulate(Tensor& gW, const double* g, const double* x) {
    const int m = gW.rows, n = gW.cols;
    for (int r = 0; r < m; ++r) {
        double* row = gW.v.data() + static_cast<std::size_t>(r) * n;
        const double gr = g[r];
        for (int c = 0; c < n; ++c) row[c] += gr * x[c];
    }
}

void filterbank_apply(const std::vector<double>& mag, int frames, int bins,
                      const Tensor& filters, Tensor& features) {
    const int nf = filters.rows;
    for (int t = 0; t < frames; ++t) {
        const double* m = mag.data() + static_cast<std::size_t>(t) * bins;
        for (int f = 0; f < nf; ++f) {
            const double* w = filters.v.data() + static_cast<std::size_t>(f) * bins;
            double acc = 0.0;
            for (int k = 0; k < bins; ++k) acc += w[k] * m[k];
            features.at(t, f) = acc;
        }
    }
}

}  // namespace ref

// Below this size the parallel-for overhead dominates.
static constexpr int kParallelFlops = 16 * 1024;

void matvec(const Tensor& W, const double* x, double* out) {
    const int m = W.rows, n = W.cols;
    if (m * n < kParallelFlops) {
        ref::matvec(W, x, out);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
        const double* row = W.v.data() + static_cast<std::size_t>(r) * n;
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

void matvec_transposed(const Tensor& W, const double* y, double* out) {
    const int m = W.rows, n = W.cols;
    if (m * n < kParallelFlops) {
        ref::matvec_transposed(W, y, out);
        return;
    }
    // Column-parallel: each out[c] is a serial dot over rows.
#pragma omp parallel for schedule(static)
    for (int c = 0; c < n; ++c) {
        double acc = 0.0;
        for (int r = 0; r < m; ++r) acc += y[r] * W.v[static_cast<std::size_t>(r) * n + c];
        out[c] = acc;
    }
}

void outer_accumulate(Tensor& gW, const double* g, const double* x) {
    const int m = gW.rows, n = gW.cols;
    if (m * n < kParallelFlops) {
        ref::outer_accumulate(gW, g, x);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
        double* row = gW.v.data() + static_cast<std::size_t>(r) * n;
        const double gr = g[r];
        for (int c = 0; c < n; ++c) row[c] += gr * x[c];
    }
}

void filterbank_apply(const std::vector<double>& mag, int frames, int bins,
                      const Tensor& filters, Tensor& features) {
    if (frames * filters.rows * bins < kParallelFlops) {
        ref::filterbank_apply(mag, frames, bins, filters, features);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        const double* m = mag.data() + static_cast<std::size_t>(t) * bins;
        for (int f = 0; f < filters.rows; ++f) {
            const double* w = filters.v.data() + static_cast<std::size_t>(f) * bins;
            double acc = 0.0;
            for (int k = 0; k < bins; ++k) acc += w[k] * m[k];
            features.at(t, f) = acc;
        }
    }
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> t = w * a[i + k + len / 2];
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 2.0 : -2.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = sign * std::numbers::pi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n);
            acc += a[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

}  // namespace biatt::kernels
