#include "biatt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "biatt/enhance.hpp"

namespace biatt {

double segmental_snr(const Waveform& reference, const Waveform& estimate) {
    if (reference.samples.size() != estimate.samples.size())
        throw InvalidInput("segmental_snr: length mismatch");
    if (reference.samples.empty()) throw InvalidInput("segmental_snr: empty input");

    const int frame = reference.sample_rate * 32 / 1000;  // 32 ms
    const int hop = frame / 2;
    const int n = reference.length();

    double sum = 0.0;
    int frames = 0;
    for (int start = 0; start + frame <= n || start == 0; start += hop) {
        const int end = std::min(start + frame, n);
        double ref_e = 0.0, err_e = 0.0;
        for (int i = start; i < end; ++i) {
            ref_e += reference.samples[i] * reference.samples[i];
            const double d = reference.samples[i] - estimate.samples[i];
            err_e += d * d;
        }
        if (ref_e < 1e-10) continue;
        double v = (err_e == 0.0) ? 35.0 : 10.0 * std::log10(ref_e / err_e);
        v = std::clamp(v, -10.0, 35.0);
        sum += v;
        ++frames;
    }
    if (frames == 0) throw InvalidInput("segmental_snr: reference is silent");
    return sum / frames;
}

double log_spectral_distance(const Waveform& reference, const Waveform& estimate, const StftConfig& cfg) {
    if (reference.samples.size() != estimate.samples.size())
        throw InvalidInput("log_spectral_distance: length mismatch");

    const Spectrogram r = stft(reference, cfg);
    const Spectrogram e = stft(estimate, cfg);
    const int bins = cfg.bins();
    constexpr double eps = 1e-8;

    double sum = 0.0;
    for (int t = 0; t < r.n_frames; ++t) {
        double acc = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double d = 20.0 * std::log10((std::abs(r.at(t, k)) + eps) / (std::abs(e.at(t, k)) + eps));
            acc += d * d;
        }
        sum += std::sqrt(acc / bins);
    }
    return sum / r.n_frames;
}

void MetricReport::recompute_buckets() {
    buckets.clear();
    for (const MetricRow& r : rows) {
        BucketStats& b = buckets[r.snr_db];
        b.snr_db = r.snr_db;
        ++b.count;
        b.seg_snr_noisy += r.seg_snr_noisy;
        b.seg_snr_enhanced += r.seg_snr_enhanced;
        b.lsd_noisy += r.lsd_noisy;
        b.lsd_enhanced += r.lsd_enhanced;
    }
    for (auto& [snr, b] : buckets) {
        b.seg_snr_noisy /= b.count;
        b.seg_snr_enhanced /= b.count;
        b.lsd_noisy /= b.count;
        b.lsd_enhanced /= b.count;
    }
}

MetricReport evaluate_corpus(const ModelParams& params, const AttentionConfig& att,
                             const Manifest& manifest, const std::string& split_tag,
                             const StftConfig& cfg, const MelFilterBank& bank) {
    std::vector<const ManifestEntry*> selected;
    for (const ManifestEntry& e : manifest.entries)
        if (split_tag.empty() || e.split == split_tag) selected.push_back(&e);

    MetricReport report;
    report.rows.resize(selected.size());
    std::vector<char> ok(selected.size(), 0);

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(selected.size()); ++i) {
        try {
            const ManifestEntry& e = *selected[i];
            const Waveform clean = read_wav(e.clean_path);
            const Waveform noisy = noisy_waveform_for(e);
            const EnhanceResult enhanced = enhance(params, att, noisy, cfg, bank);

            MetricRow row;
            row.id = std::filesystem::path(e.clean_path).stem().string();
            row.snr_db = e.snr_db;
            row.seg_snr_noisy = segmental_snr(clean, noisy);
            row.seg_snr_enhanced = segmental_snr(clean, enhanced.wave);
            row.lsd_noisy = log_spectral_distance(clean, noisy, cfg);
            row.lsd_enhanced = log_spectral_distance(clean, enhanced.wave, cfg);
            report.rows[i] = std::move(row);
            ok[i] = 1;
        } catch (const std::exception& ex) {
#pragma omp critical
            std::cerr << "warning: skipping row " << selected[i]->clean_path << ": " << ex.what() << "\n";
        }
    }

    // Drop skipped rows, keeping manifest order.
    std::vector<MetricRow> kept;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (ok[i])
            kept.push_back(std::move(report.rows[i]));
        else
            ++report.skipped;
    }
    report.rows = std::move(kept);
    report.recompute_buckets();
    return report;
}

void write_metric_report_csv(const std::string& path, const MetricReport& report) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write metric report: " + path);
    f.precision(17);
    f << "id,snr_db,seg_snr_noisy,seg_snr_enhanced,lsd_noisy,lsd_enhanced\n";
    for (const MetricRow& r : report.rows)
        f << r.id << ',' << r.snr_db << ',' << r.seg_snr_noisy << ',' << r.seg_snr_enhanced << ','
          << r.lsd_noisy << ',' << r.lsd_enhanced << '\n';
    for (const auto& [snr, b] : report.buckets)
        f << "bucket_mean," << b.snr_db << ',' << b.seg_snr_noisy << ',' << b.seg_snr_enhanced << ','
          << b.lsd_noisy << ',' << b.lsd_enhanced << '\n';
    if (!f) throw IoError("metric report write failed: " + path);
}

SweepResult sweep_windows(const Manifest& manifest, const SweepConfig& cfg, const MelFilterBank& bank) {
    if (cfg.omegas.empty() || cfg.xis.empty()) throw InvalidConfig("sweep: empty omega/xi value list");

    const auto train_examples = load_examples(manifest, "train", cfg.stft, bank);
    const auto test_examples = load_examples(manifest, "test", cfg.stft, bank);
    if (train_examples.empty()) throw InvalidInput("sweep: manifest has no train rows");
    if (test_examples.empty()) throw InvalidInput("sweep: manifest has no test rows");

    SweepResult result;
    result.omegas = cfg.omegas;
    result.xis = cfg.xis;
    result.improvement = Tensor(static_cast<int>(cfg.omegas.size()), static_cast<int>(cfg.xis.size()));

    for (std::size_t oi = 0; oi < cfg.omegas.size(); ++oi) {
        for (std::size_t xj = 0; xj < cfg.xis.size(); ++xj) {
            const AttentionConfig att{cfg.omegas[oi], cfg.xis[xj]};
            ModelParams params = init_params(cfg.dims, cfg.train.seed);
            const TrainOutcome outcome = train(std::move(params), att, train_examples, test_examples, cfg.train);

            double improvement = 0.0;
            int counted = 0;
            for (const ManifestEntry& e : manifest.entries) {
                if (e.split != "test") continue;
                const Waveform clean = read_wav(e.clean_path);
                const Waveform noisy = noisy_waveform_for(e);
                const EnhanceResult enhanced = enhance(outcome.best_params, att, noisy, cfg.stft, bank);
                improvement += segmental_snr(clean, enhanced.wave) - segmental_snr(clean, noisy);
                ++counted;
            }
            result.improvement.at(static_cast<int>(oi), static_cast<int>(xj)) = improvement / counted;
        }
    }
    return result;
}

void write_sweep_csv(const std::string& path, const SweepResult& result) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write sweep grid: " + path);
    f.precision(17);
    f << "omega\\xi";
    for (int xi : result.xis) f << ',' << xi;
    f << '\n';
    for (std::size_t i = 0; i < result.omegas.size(); ++i) {
        f << result.omegas[i];
        for (std::size_t j = 0; j < result.xis.size(); ++j)
            f << ',' << result.improvement.at(static_cast<int>(i), static_cast<int>(j));
        f << '\n';
    }
    if (!f) throw IoError("sweep grid write failed: " + path);
}

}  // namespace biatt
