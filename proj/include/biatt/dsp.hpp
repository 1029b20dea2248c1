#pragma once

#include <complex>
#include <vector>

#include "biatt/types.hpp"
#include "biatt/wav.hpp"

namespace biatt {

// Analysis framing. hop = frame_len - overlap.
struct StftConfig {
    int frame_len = 512;
    int overlap = 128;

    int hop() const { return frame_len - overlap; }
    int bins() const { return frame_len / 2 + 1; }

    void validate() const;
};

std::vector<double> make_hann(int frame_len);

// Complex half-spectrum frames plus framing metadata.
//
// `frames` holds exactly T = 1 + ceil((len - frame_len)/hop) rows. The Hann
// window is zero at its first coefficient, so those frames alone cannot carry
// the first couple of samples of the signal (nor the last ones when the length
// divides the hop evenly). `head_frame` / `tail_frame` are extra analysis
// frames at offsets -hop and T*hop that keep that boundary information so the
// inverse transform is exact end to end; they are empty when absent.
struct Spectrogram {
    std::vector<std::complex<double>> frames;  // T x bins row-major
    int n_frames = 0;
    StftConfig config;
    int original_len = 0;
    int sample_rate = 16000;
    std::vector<std::complex<double>> head_frame;  // bins, offset -hop
    std::vector<std::complex<double>> tail_frame;  // bins, offset T*hop

    std::complex<double>& at(int t, int k) { return frames[static_cast<std::size_t>(t) * config.bins() + k]; }
    std::complex<double> at(int t, int k) const { return frames[static_cast<std::size_t>(t) * config.bins() + k]; }
};

Spectrogram stft(const Waveform& wave, const StftConfig& cfg);

// Least-squares weighted overlap-add: accumulate w * idft(frame), divide by
// the accumulated w^2 (positions with sum w^2 < 1e-8 are left at zero), trim
// to original_len.
Waveform istft(const Spectrogram& spec);

// Triangular mel filters, unit peak, row-major n_filters x n_bins.
struct MelFilterBank {
    int n_filters = 0;
    int n_bins = 0;
    Tensor filters;             // n_filters x n_bins
    std::vector<int> peak_bins;
    double f_low = 0.0;
    double f_high = 8000.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelFilterBank build_mel_bank(int n_filters, int n_bins, int sample_rate, double f_low, double f_high);

FeatureSequence extract_fbank(const Spectrogram& spec, const MelFilterBank& bank);

// Per-bin gain matrix (T x n_bins) from per-filter gains; covered bins take the
// filter-weighted average, bins outside all support copy the nearest covered one.
Tensor expand_gains(const GainSequence& gains, const MelFilterBank& bank);

// Complex scaling per bin; noisy phase is preserved. Boundary frames are scaled
// with the nearest frame's gain row.
Spectrogram apply_spectral_gain(const Spectrogram& spec, const Tensor& gain);

// 10*log10(sum ref^2 / sum (ref-est)^2); +inf when the error is exactly zero.
double snr_db(const std::vector<double>& reference, const std::vector<double>& estimate);

}  // namespace biatt
