#include "biatt/enhance.hpp"

namespace biatt {

EnhanceResult enhance(const ModelParams& params, const AttentionConfig& att, const Waveform& noisy,
                      const StftConfig& cfg, const MelFilterBank& bank, bool want_trace) {
    if (bank.n_filters != params.dims.feature)
        throw InvalidInput("enhance: filter bank size " + std::to_string(bank.n_filters) +
                           " does not match model feature dimension " + std::to_string(params.dims.feature));

    const Spectrogram spec = stft(noisy, cfg);
    const FeatureSequence feats = extract_fbank(spec, bank);

    EnhanceResult r;
    if (want_trace) {
        ForwardPass fp(params, feats, att);
        r.gains = fp.gains();
        r.trace = fp.trace();
    } else {
        r.gains = predict_gains(params, feats, att);
    }
    r.bin_gains = expand_gains(r.gains, bank);
    r.wave = istft(apply_spectral_gain(spec, r.bin_gains));
    return r;
}

}  // namespace biatt
