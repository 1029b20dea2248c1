#pragma once

#include <map>
#include <string>
#include <vector>

#include "biatt/data.hpp"
#include "biatt/dsp.hpp"
#include "biatt/model.hpp"
#include "biatt/training.hpp"

namespace biatt {

// Frame-averaged SNR over 32 ms frames with 50% overlap, per-frame values
// clamped to [-10, 35] dB; frames with reference energy below 1e-10 excluded.
double segmental_snr(const Waveform& reference, const Waveform& estimate);

// Mean over frames of the RMS log-magnitude spectral difference in dB,
// eps = 1e-8, framing per the given analysis config.
double log_spectral_distance(const Waveform& reference, const Waveform& estimate,
                             const StftConfig& cfg = StftConfig{});

struct MetricRow {
    std::string id;
    double snr_db = 0.0;
    double seg_snr_noisy = 0.0;
    double seg_snr_enhanced = 0.0;
    double lsd_noisy = 0.0;
    double lsd_enhanced = 0.0;
};

struct BucketStats {
    double snr_db = 0.0;
    int count = 0;
    double seg_snr_noisy = 0.0;
    double seg_snr_enhanced = 0.0;
    double lsd_noisy = 0.0;
    double lsd_enhanced = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::map<double, BucketStats> buckets;  // keyed by manifest SNR
    int skipped = 0;

    void recompute_buckets();
};

// Enhance every selected manifest row and score it against its clean
// reference. Rows whose files are unreadable are skipped with a warning.
MetricReport evaluate_corpus(const ModelParams& params, const AttentionConfig& att,
                             const Manifest& manifest, const std::string& split_tag,
                             const StftConfig& cfg, const MelFilterBank& bank);

void write_metric_report_csv(const std::string& path, const MetricReport& report);

struct SweepConfig {
    std::vector<int> omegas;
    std::vector<int> xis;
    TrainConfig train;
    ModelDims dims;
    StftConfig stft;
};

struct SweepResult {
    std::vector<int> omegas;
    std::vector<int> xis;
    Tensor improvement;  // rows = omegas, cols = xis; mean seg-SNR gain (dB)
};

// Train one model per (omega, xi) cell on the manifest's train split and score
// mean segmental-SNR improvement on its test split.
SweepResult sweep_windows(const Manifest& manifest, const SweepConfig& cfg, const MelFilterBank& bank);

void write_sweep_csv(const std::string& path, const SweepResult& result);

}  // namespace biatt
