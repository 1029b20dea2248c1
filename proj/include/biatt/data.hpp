#pragma once

#include <string>
#include <utility>
#include <vector>

#include "biatt/dsp.hpp"
#include "biatt/training.hpp"
#include "biatt/wav.hpp"

namespace biatt {

struct ManifestEntry {
    std::string clean_path;
    std::string noise_ref;  // noise WAV path, or "synthetic:<kind>" for generated corpora
    double snr_db = 0.0;
    std::string split;      // "train" or "test"
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

// CSV columns: clean_path,noise_ref,snr_db,split. Loading validates that the
// referenced files exist, SNRs are finite and split tags are known.
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& manifest);

// For "synthetic:" rows the mixture was written next to the clean file as
// .../noisy_XXXX.wav; for file-backed noise the mixture is produced on load.
std::string derived_noisy_path(const ManifestEntry& entry);
Waveform noisy_waveform_for(const ManifestEntry& entry);

struct MixResult {
    Waveform noisy;
    double noise_scale = 1.0;   // factor applied to the noise before adding
    double peak_rescale = 1.0;  // applied to the whole mixture when |peak| > 1
};

// Scale the noise so that 10*log10(P_clean / P_scaled_noise) equals snr_db,
// with powers measured over the full clean-signal support. Noise shorter than
// the clean signal is tiled cyclically.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

struct ToyCorpusConfig {
    int n_utterances = 50;
    std::uint64_t seed = 0;
    std::vector<double> snr_choices = {-10.0, -5.0, 0.0, 5.0, 10.0};
    double train_ratio = 0.8;
    int sample_rate = 16000;
};

// Synthetic stand-in for a speech corpus: harmonic "speech" surrogates with
// slow amplitude modulation, mixed with white/brown/babble noise at the
// configured SNRs. Writes clean/noisy WAV pairs plus manifest.csv into
// out_dir; byte-identical output per seed.
Manifest make_toy_corpus(const ToyCorpusConfig& cfg, const std::string& out_dir);

std::pair<Manifest, Manifest> split(const Manifest& manifest, double ratio, std::uint64_t seed);

// Run a clean/noisy pair through the analysis front end.
TrainingExample load_training_example(const ManifestEntry& entry, const StftConfig& cfg,
                                      const MelFilterBank& bank);

// All entries of a split ("" selects every row), in manifest order.
std::vector<TrainingExample> load_examples(const Manifest& manifest, const std::string& split_tag,
                                           const StftConfig& cfg, const MelFilterBank& bank);

}  // namespace biatt
