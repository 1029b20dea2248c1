#include "biatt/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "biatt/kernels.hpp"

namespace biatt {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> forward_dft(std::vector<std::complex<double>> buf) {
    if (is_pow2(static_cast<int>(buf.size()))) {
        kernels::fft(buf, false);
        return buf;
    }
    return kernels::dft_naive(buf, false);
}

std::vector<std::complex<double>> inverse_dft(std::vector<std::complex<double>> buf) {
    if (is_pow2(static_cast<int>(buf.size()))) {
        kernels::fft(buf, true);
        return buf;
    }
    return kernels::dft_naive(buf, true);
}

// One analysis frame at signal offset `off` (may be negative or past the end;
// out-of-range samples are zero).
std::vector<std::complex<double>> analyze_frame(const std::vector<double>& x, int off,
                                                const std::vector<double>& window, int bins) {
    const int n = static_cast<int>(window.size());
    std::vector<std::complex<double>> buf(n);
    const int len = static_cast<int>(x.size());
    for (int k = 0; k < n; ++k) {
        const int idx = off + k;
        const double s = (idx >= 0 && idx < len) ? x[idx] : 0.0;
        buf[k] = std::complex<double>(window[k] * s, 0.0);
    }
    auto full = forward_dft(std::move(buf));
    full.resize(bins);
    return full;
}

// Rebuild the full symmetric spectrum from the stored half and accumulate the
// windowed inverse into num/den at signal offset `off`.
void synthesize_frame(const std::vector<std::complex<double>>& half, int off,
                      const std::vector<double>& window, std::vector<double>& num,
                      std::vector<double>& den) {
    const int n = static_cast<int>(window.size());
    const int bins = static_cast<int>(half.size());
    std::vector<std::complex<double>> full(n);
    for (int k = 0; k < bins; ++k) full[k] = half[k];
    for (int k = bins; k < n; ++k) full[k] = std::conj(half[n - k]);
    auto time = inverse_dft(std::move(full));
    const int len = static_cast<int>(num.size());
    for (int k = 0; k < n; ++k) {
        const int idx = off + k;
        if (idx < 0 || idx >= len) continue;
        num[idx] += window[k] * time[k].real();
        den[idx] += window[k] * window[k];
    }
}

}  // namespace

void StftConfig::validate() const {
    if (frame_len < 2) throw InvalidConfig("frame_len must be >= 2");
    if (overlap <= 0 || overlap >= frame_len) throw InvalidConfig("overlap must satisfy 0 < overlap < frame_len");
}

std::vector<double> make_hann(int frame_len) {
    if (frame_len < 2) throw InvalidConfig("Hann window needs frame_len >= 2");
    std::vector<double> w(frame_len);
    for (int k = 0; k < frame_len; ++k)
        w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / (frame_len - 1)));
    return w;
}

Spectrogram stft(const Waveform& wave, const StftConfig& cfg) {
    cfg.validate();
    if (wave.samples.empty()) throw InvalidInput("stft: empty waveform");
    for (double s : wave.samples)
        if (!std::isfinite(s)) throw InvalidInput("stft: non-finite sample");

    const int len = wave.length();
    const int hop = cfg.hop();
    const auto window = make_hann(cfg.frame_len);

    int n_frames = 1;
    if (len > cfg.frame_len)
        n_frames = 1 + static_cast<int>((static_cast<long long>(len) - cfg.frame_len + hop - 1) / hop);

    Spectrogram spec;
    spec.config = cfg;
    spec.original_len = len;
    spec.sample_rate = wave.sample_rate;
    spec.n_frames = n_frames;
    spec.frames.resize(static_cast<std::size_t>(n_frames) * cfg.bins());
    for (int t = 0; t < n_frames; ++t) {
        auto fr = analyze_frame(wave.samples, t * hop, window, cfg.bins());
        std::copy(fr.begin(), fr.end(), spec.frames.begin() + static_cast<std::size_t>(t) * cfg.bins());
    }
    spec.head_frame = analyze_frame(wave.samples, -hop, window, cfg.bins());
    if (n_frames * hop < len)
        spec.tail_frame = analyze_frame(wave.samples, n_frames * hop, window, cfg.bins());
    return spec;
}

Waveform istft(const Spectrogram& spec) {
    spec.config.validate();
    const int len = spec.original_len;
    const int hop = spec.config.hop();
    const auto window = make_hann(spec.config.frame_len);

    Waveform out;
    out.sample_rate = spec.sample_rate;
    out.samples.assign(len, 0.0);
    if (len == 0) return out;

    std::vector<double> num(len, 0.0), den(len, 0.0);
    const int bins = spec.config.bins();
    for (int t = 0; t < spec.n_frames; ++t) {
        std::vector<std::complex<double>> half(spec.frames.begin() + static_cast<std::size_t>(t) * bins,
                                               spec.frames.begin() + static_cast<std::size_t>(t + 1) * bins);
        synthesize_frame(half, t * hop, window, num, den);
    }
    if (!spec.head_frame.empty()) synthesize_frame(spec.head_frame, -hop, window, num, den);
    if (!spec.tail_frame.empty()) synthesize_frame(spec.tail_frame, spec.n_frames * hop, window, num, den);

    for (int i = 0; i < len; ++i)
        out.samples[i] = (den[i] < 1e-8) ? 0.0 : num[i] / den[i];
    return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterBank build_mel_bank(int n_filters, int n_bins, int sample_rate, double f_low, double f_high) {
    if (n_filters < 1) throw InvalidConfig("mel bank needs at least one filter");
    if (!(f_low < f_high) || f_high > sample_rate / 2.0)
        throw InvalidConfig("mel bank needs f_low < f_high <= sample_rate/2");

    const int fft_len = 2 * (n_bins - 1);
    const double bin_hz = static_cast<double>(sample_rate) / fft_len;

    const double mel_lo = hz_to_mel(f_low);
    const double mel_hi = hz_to_mel(f_high);
    const double step = (mel_hi - mel_lo) / (n_filters + 1);

    // Nominal centers are equally spaced on the mel axis; each is snapped to
    // its nearest FFT bin so the unit peak lands exactly on a bin and neighbor
    // filters vanish exactly at each other's peak bins.
    std::vector<int> peak(n_filters);
    std::vector<double> center_mel(n_filters);
    for (int m = 0; m < n_filters; ++m) {
        const double hz = mel_to_hz(mel_lo + (m + 1) * step);
        int b = static_cast<int>(std::lround(hz / bin_hz));
        b = std::clamp(b, 0, n_bins - 1);
        peak[m] = b;
        center_mel[m] = hz_to_mel(b * bin_hz);
        if (m > 0 && peak[m] <= peak[m - 1])
            throw InvalidConfig("mel bank infeasible: filter centers " + std::to_string(m - 1) + " and " +
                                std::to_string(m) + " land on the same FFT bin");
    }

    MelFilterBank bank;
    bank.n_filters = n_filters;
    bank.n_bins = n_bins;
    bank.f_low = f_low;
    bank.f_high = f_high;
    bank.peak_bins = peak;
    bank.filters = Tensor(n_filters, n_bins);

    for (int m = 0; m < n_filters; ++m) {
        const double left = (m == 0) ? mel_lo : center_mel[m - 1];
        const double mid = center_mel[m];
        const double right = (m == n_filters - 1) ? mel_hi : center_mel[m + 1];
        for (int k = 0; k < n_bins; ++k) {
            const double mk = hz_to_mel(k * bin_hz);
            double w = 0.0;
            if (k == peak[m]) {
                w = 1.0;
            } else if (mk > left && mk < mid) {
                w = (mk - left) / (mid - left);
            } else if (mk > mid && mk < right) {
                w = (right - mk) / (right - mid);
            }
            bank.filters.at(m, k) = w;
        }
    }
    return bank;
}

FeatureSequence extract_fbank(const Spectrogram& spec, const MelFilterBank& bank) {
    const int bins = spec.config.bins();
    if (bins != bank.n_bins) throw InvalidInput("extract_fbank: bin count mismatch");

    const int frames = spec.n_frames;
    std::vector<double> mag(static_cast<std::size_t>(frames) * bins);
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec.frames[i]);

    FeatureSequence feats(frames, bank.n_filters);
    kernels::filterbank_apply(mag, frames, bins, bank.filters, feats.values);
    return feats;
}

Tensor expand_gains(const GainSequence& gains, const MelFilterBank& bank) {
    if (gains.bands() != bank.n_filters) throw InvalidInput("expand_gains: gain column count mismatch");

    const int frames = gains.frames();
    const int bins = bank.n_bins;
    Tensor g(frames, bins);

    // Column coverage is frame-independent; precompute it.
    std::vector<double> coverage(bins, 0.0);
    for (int m = 0; m < bank.n_filters; ++m)
        for (int k = 0; k < bins; ++k) coverage[k] += bank.filters.at(m, k);

    int first_covered = -1, last_covered = -1;
    for (int k = 0; k < bins; ++k) {
        if (coverage[k] > 0.0) {
            if (first_covered < 0) first_covered = k;
            last_covered = k;
        }
    }
    if (first_covered < 0) throw InvalidInput("expand_gains: filter bank has empty support");

#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        for (int k = first_covered; k <= last_covered; ++k) {
            double num = 0.0;
            for (int m = 0; m < bank.n_filters; ++m) {
                const double w = bank.filters.at(m, k);
                if (w != 0.0) num += gains.values.at(t, m) * w;
            }
            g.at(t, k) = num / coverage[k];
        }
        for (int k = 0; k < first_covered; ++k) g.at(t, k) = g.at(t, first_covered);
        for (int k = last_covered + 1; k < bins; ++k) g.at(t, k) = g.at(t, last_covered);
    }
    return g;
}

Spectrogram apply_spectral_gain(const Spectrogram& spec, const Tensor& gain) {
    const int bins = spec.config.bins();
    if (gain.rows != spec.n_frames || gain.cols != bins)
        throw InvalidInput("apply_spectral_gain: gain matrix shape mismatch");

    Spectrogram out = spec;
    for (int t = 0; t < spec.n_frames; ++t)
        for (int k = 0; k < bins; ++k) out.at(t, k) = spec.at(t, k) * gain.at(t, k);

    if (!out.head_frame.empty())
        for (int k = 0; k < bins; ++k) out.head_frame[k] *= gain.at(0, k);
    if (!out.tail_frame.empty())
        for (int k = 0; k < bins; ++k) out.tail_frame[k] *= gain.at(spec.n_frames - 1, k);
    return out;
}

double snr_db(const std::vector<double>& reference, const std::vector<double>& estimate) {
    if (reference.size() != estimate.size()) throw InvalidInput("snr_db: length mismatch");
    double sig = 0.0, err = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        sig += reference[i] * reference[i];
        const double d = reference[i] - estimate[i];
        err += d * d;
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / err);
}

}  // namespace biatt
