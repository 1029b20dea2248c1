#pragma once

#include <optional>

#include "biatt/data.hpp"
#include "biatt/dsp.hpp"
#include "biatt/model.hpp"

namespace biatt {

struct EnhanceResult {
    Waveform wave;                     // same length as the input
    GainSequence gains;                // T x n_filters
    Tensor bin_gains;                  // T x n_bins
    std::optional<ForwardTrace> trace; // filled when want_trace is set
};

// Full signal path: stft -> fbank -> gain prediction -> gain expansion ->
// spectral masking -> istft, reusing the noisy phase.
EnhanceResult enhance(const ModelParams& params, const AttentionConfig& att, const Waveform& noisy,
                      const StftConfig& cfg, const MelFilterBank& bank, bool want_trace = false);

}  // namespace biatt
