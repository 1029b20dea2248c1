#include "biatt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace biatt {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double mean_power(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc / static_cast<double>(x.size());
}

}  // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);

    Manifest m;
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty manifest: " + path);
    if (split_csv_line(line) != std::vector<std::string>{"clean_path", "noise_ref", "snr_db", "split"})
        throw IoError("unexpected manifest header: " + path);

    int row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 4)
            throw IoError("manifest row " + std::to_string(row) + ": expected 4 columns");
        ManifestEntry e;
        e.clean_path = cells[0];
        e.noise_ref = cells[1];
        try {
            e.snr_db = std::stod(cells[2]);
        } catch (...) {
            throw IoError("manifest row " + std::to_string(row) + ": bad snr_db '" + cells[2] + "'");
        }
        if (!std::isfinite(e.snr_db))
            throw IoError("manifest row " + std::to_string(row) + ": non-finite snr_db");
        e.split = cells[3];
        if (e.split != "train" && e.split != "test")
            throw IoError("manifest row " + std::to_string(row) + ": unknown split tag '" + e.split + "'");
        if (!fs::exists(e.clean_path))
            throw IoError("manifest row " + std::to_string(row) + ": missing file " + e.clean_path);
        if (e.noise_ref.rfind("synthetic:", 0) == 0) {
            if (!fs::exists(derived_noisy_path(e)))
                throw IoError("manifest row " + std::to_string(row) + ": missing file " + derived_noisy_path(e));
        } else if (!fs::exists(e.noise_ref)) {
            throw IoError("manifest row " + std::to_string(row) + ": missing file " + e.noise_ref);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest: " + path);
    f << "clean_path,noise_ref,snr_db,split\n";
    f.precision(17);
    for (const ManifestEntry& e : manifest.entries)
        f << e.clean_path << ',' << e.noise_ref << ',' << e.snr_db << ',' << e.split << '\n';
    if (!f) throw IoError("manifest write failed: " + path);
}

std::string derived_noisy_path(const ManifestEntry& entry) {
    fs::path p(entry.clean_path);
    std::string name = p.filename().string();
    const auto pos = name.find("clean");
    if (pos == std::string::npos)
        throw InvalidInput("cannot derive noisy path from '" + entry.clean_path + "'");
    name.replace(pos, 5, "noisy");
    return (p.parent_path() / name).string();
}

Waveform noisy_waveform_for(const ManifestEntry& entry) {
    if (entry.noise_ref.rfind("synthetic:", 0) == 0) return read_wav(derived_noisy_path(entry));
    const Waveform clean = read_wav(entry.clean_path);
    const Waveform noise = read_wav(entry.noise_ref);
    return mix_at_snr(clean, noise, entry.snr_db).noisy;
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
    if (clean.samples.empty()) throw InvalidInput("mix_at_snr: empty clean signal");
    if (noise.samples.empty()) throw InvalidInput("mix_at_snr: empty noise signal");
    if (clean.sample_rate != noise.sample_rate)
        throw InvalidInput("mix_at_snr: sample rates differ");
    if (!std::isfinite(snr_db)) throw InvalidInput("mix_at_snr: non-finite SNR");

    const std::size_t n = clean.samples.size();
    std::vector<double> seg(n);
    for (std::size_t i = 0; i < n; ++i) seg[i] = noise.samples[i % noise.samples.size()];

    const double p_clean = mean_power(clean.samples);
    if (p_clean == 0.0) throw InvalidInput("mix_at_snr: silent clean signal");
    const double p_noise = mean_power(seg);
    if (p_noise == 0.0) throw InvalidInput("mix_at_snr: silent noise signal");

    const double target_noise_power = p_clean * std::pow(10.0, -snr_db / 10.0);
    const double scale = std::sqrt(target_noise_power / p_noise);

    MixResult r;
    r.noise_scale = scale;
    r.noisy.sample_rate = clean.sample_rate;
    r.noisy.samples.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r.noisy.samples[i] = clean.samples[i] + scale * seg[i];
        peak = std::max(peak, std::abs(r.noisy.samples[i]));
    }
    if (peak > 1.0) {
        r.peak_rescale = 1.0 / peak;
        for (double& s : r.noisy.samples) s *= r.peak_rescale;
    }
    return r;
}

namespace {

// Harmonic series with slow amplitude modulation; the closest thing to voiced
// speech that stays fully deterministic and analytic.
std::vector<double> harmonic_voice(Rng& rng, std::size_t n, int sample_rate) {
    const double f0 = rng.uniform(100.0, 300.0);
    const int harmonics = 2 + static_cast<int>(rng.index(4));  // 2..5
    const double am_rate = rng.uniform(2.0, 8.0);
    const double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    std::vector<double> amp(harmonics), phase(harmonics);
    for (int h = 0; h < harmonics; ++h) {
        amp[h] = rng.uniform(0.4, 1.0) / (h + 1);
        phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double env = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase);
        double s = 0.0;
        for (int h = 0; h < harmonics; ++h)
            s += amp[h] * std::sin(2.0 * std::numbers::pi * (h + 1) * f0 * t + phase[h]);
        x[i] = env * s;
    }
    return x;
}

void scale_to_rms(std::vector<double>& x, double target_rms) {
    const double p = mean_power(x);
    if (p <= 0.0) return;
    const double s = target_rms / std::sqrt(p);
    for (double& v : x) v *= s;
}

std::vector<double> make_noise(Rng& rng, const std::string& kind, std::size_t n, int sample_rate) {
    std::vector<double> x(n);
    if (kind == "white") {
        for (double& v : x) v = rng.normal();
    } else if (kind == "brown") {
        double acc = 0.0;
        for (double& v : x) {
            acc += rng.normal();
            v = acc;
        }
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
        for (double& v : x) v -= mean;
    } else {  // babble: a crowd of harmonic processes
        for (int voice = 0; voice < 10; ++voice) {
            const auto one = harmonic_voice(rng, n, sample_rate);
            for (std::size_t i = 0; i < n; ++i) x[i] += one[i];
        }
    }
    scale_to_rms(x, 1.0);
    return x;
}

}  // namespace

Manifest make_toy_corpus(const ToyCorpusConfig& cfg, const std::string& out_dir) {
    if (cfg.n_utterances < 1) throw InvalidConfig("toy corpus needs n >= 1");
    if (cfg.snr_choices.empty()) throw InvalidConfig("toy corpus needs at least one SNR");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    {
        // Probe writability up front so failures leave no partial manifest.
        const fs::path probe = fs::path(out_dir) / ".write_probe";
        std::ofstream p(probe);
        if (!p) throw IoError("output directory not writable: " + out_dir);
        p.close();
        fs::remove(probe, ec);
    }

    static const char* kNoiseKinds[3] = {"white", "brown", "babble"};

    Rng rng(cfg.seed);
    Manifest manifest;
    for (int i = 0; i < cfg.n_utterances; ++i) {
        const double dur = rng.uniform(1.0, 3.0);
        const std::size_t n = static_cast<std::size_t>(std::lround(dur * cfg.sample_rate));

        std::vector<double> clean = harmonic_voice(rng, n, cfg.sample_rate);
        scale_to_rms(clean, 0.04);

        const std::string kind = kNoiseKinds[rng.index(3)];
        const double snr = cfg.snr_choices[rng.index(cfg.snr_choices.size())];

        Waveform clean_wave{std::move(clean), cfg.sample_rate};
        Waveform noise_wave{make_noise(rng, kind, n, cfg.sample_rate), cfg.sample_rate};

        MixResult mix = mix_at_snr(clean_wave, noise_wave, snr);
        if (mix.peak_rescale != 1.0) {
            // Keep the pair consistent so the SNR survives on disk.
            for (double& s : clean_wave.samples) s *= mix.peak_rescale;
        }

        char base[32];
        std::snprintf(base, sizeof(base), "%04d", i);
        const std::string clean_path = (fs::path(out_dir) / ("clean_" + std::string(base) + ".wav")).string();
        const std::string noisy_path = (fs::path(out_dir) / ("noisy_" + std::string(base) + ".wav")).string();
        write_wav(clean_path, clean_wave);
        write_wav(noisy_path, mix.noisy);

        manifest.entries.push_back({clean_path, "synthetic:" + kind, snr, "train"});
    }

    if (cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0 && cfg.n_utterances > 1) {
        auto [train_part, test_part] = split(manifest, cfg.train_ratio, cfg.seed);
        Manifest tagged;
        for (auto e : train_part.entries) {
            e.split = "train";
            tagged.entries.push_back(std::move(e));
        }
        for (auto e : test_part.entries) {
            e.split = "test";
            tagged.entries.push_back(std::move(e));
        }
        // Restore manifest order by clean path for stable output.
        std::sort(tagged.entries.begin(), tagged.entries.end(),
                  [](const ManifestEntry& a, const ManifestEntry& b) { return a.clean_path < b.clean_path; });
        manifest = std::move(tagged);
    }

    save_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
    return manifest;
}

std::pair<Manifest, Manifest> split(const Manifest& manifest, double ratio, std::uint64_t seed) {
    if (manifest.entries.empty()) throw InvalidInput("split: empty manifest");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidConfig("split: ratio must be in (0, 1)");

    const std::size_t n = manifest.entries.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

    const std::size_t n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
    Manifest train_part, test_part;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            train_part.entries.push_back(manifest.entries[order[i]]);
        else
            test_part.entries.push_back(manifest.entries[order[i]]);
    }
    return {train_part, test_part};
}

TrainingExample load_training_example(const ManifestEntry& entry, const StftConfig& cfg,
                                      const MelFilterBank& bank) {
    const Waveform clean = read_wav(entry.clean_path);
    const Waveform noisy = noisy_waveform_for(entry);
    validate_pipeline_input(clean);
    validate_pipeline_input(noisy);

    TrainingExample ex;
    ex.noisy = extract_fbank(stft(noisy, cfg), bank);
    ex.clean = extract_fbank(stft(clean, cfg), bank);
    ex.snr_db = entry.snr_db;
    ex.id = fs::path(entry.clean_path).stem().string();
    return ex;
}

std::vector<TrainingExample> load_examples(const Manifest& manifest, const std::string& split_tag,
                                           const StftConfig& cfg, const MelFilterBank& bank) {
    std::vector<TrainingExample> out;
    for (const ManifestEntry& e : manifest.entries) {
        if (!split_tag.empty() && e.split != split_tag) continue;
        out.push_back(load_training_example(e, cfg, bank));
    }
    return out;
}

}  // namespace biatt
