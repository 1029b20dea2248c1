#pragma once

#include <complex>
#include <vector>

#include "biatt/types.hpp"

// Hot inner loops, shared by the tape engine and the DSP path.
//
// Every kernel exists twice: a plain serial version under kernels::ref used as
// the oracle in tests and by the benchmark, and the default version which
// parallelizes with OpenMP when the problem is large enough. Parallel variants
// assign each output element to exactly one thread, so results are bit-identical
// to the serial ones for any thread count.

namespace biatt::kernels {

namespace ref {

// out = W * x  (W: m x n, x: n, out: m)
void matvec(const Tensor& W, const double* x, double* out);

// out = W^T * y  (W: m x n, y: m, out: n)
void matvec_transposed(const Tensor& W, const double* y, double* out);

// gW += g (outer) x  (g: m, x: n, gW: m x n)
void outer_accumulate(Tensor& gW, const double* g, const double* x);

// features[t][m] = sum_k filters[m][k] * mag[t][k]
// mag: frames x bins row-major, filters: n_filters x bins.
void filterbank_apply(const std::vector<double>& mag, int frames, int bins,
                      const Tensor& filters, Tensor& features);

}  // namespace ref

void matvec(const Tensor& W, const double* x, double* out);
void matvec_transposed(const Tensor& W, const double* y, double* out);
void outer_accumulate(Tensor& gW, const double* g, const double* x);
void filterbank_apply(const std::vector<double>& mag, int frames, int bins,
                      const Tensor& filters, Tensor& features);

// In-place iterative FFT, n a power of two; inverse applies the 1/n factor.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// O(n^2) DFT for arbitrary n (fallback for non power-of-two frame lengths).
std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& a, bool inverse);

}  // namespace biatt::kernels
