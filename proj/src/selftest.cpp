#include "biatt/selftest.hpp"

#include <cmath>
#include <sstream>

#include "biatt/dsp.hpp"

namespace biatt {

namespace {

FeatureSequence random_features(Rng& rng, int frames, int bands, double lo, double hi) {
    FeatureSequence x(frames, bands);
    for (double& v : x.values.v) v = rng.uniform(lo, hi);
    return x;
}

}  // namespace

GradCheckReport gradient_check(const ModelDims& dims, const AttentionConfig& att, int frames,
                               std::uint64_t seed, double eps) {
    ModelParams params = init_params(dims, seed);
    Rng rng(Rng::derive(seed, 1));
    const FeatureSequence noisy = random_features(rng, frames, dims.feature, 0.1, 2.0);
    const FeatureSequence clean = random_features(rng, frames, dims.feature, 0.1, 2.0);

    ForwardPass fp(params, noisy, att);
    fp.mse_loss(clean);
    const Gradients analytic = fp.backward();

    // Flatten (tensor, element) pairs so one parallel loop covers everything.
    auto ents = params.entries();
    std::vector<std::pair<int, int>> slots;
    for (std::size_t i = 0; i < ents.size(); ++i)
        for (int j = 0; j < ents[i].second->size(); ++j)
            slots.emplace_back(static_cast<int>(i), j);

    std::vector<double> rel(slots.size(), 0.0);

#pragma omp parallel
    {
        ModelParams local = params;
        auto local_ents = local.entries();
#pragma omp for schedule(dynamic, 16)
        for (int s = 0; s < static_cast<int>(slots.size()); ++s) {
            const auto [ti, ei] = slots[s];
            Tensor& t = *local_ents[ti].second;
            const double saved = t[ei];
            t[ei] = saved + eps;
            const double up = ForwardPass(local, noisy, att).mse_loss(clean);
            t[ei] = saved - eps;
            const double down = ForwardPass(local, noisy, att).mse_loss(clean);
            t[ei] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double got = analytic.tensors[ti][ei];
            rel[s] = std::abs(got - fd) / (std::abs(fd) + 1e-8);
        }
    }

    GradCheckReport report;
    report.checked = static_cast<int>(slots.size());
    for (std::size_t s = 0; s < slots.size(); ++s) {
        if (rel[s] > report.max_rel_error) {
            report.max_rel_error = rel[s];
            report.worst_param = analytic.names[slots[s].first] + "[" + std::to_string(slots[s].second) + "]";
        }
    }
    return report;
}

std::vector<CheckResult> run_selftest() {
    std::vector<CheckResult> results;

    {
        CheckResult r{"gradient finite differences", false, ""};
        try {
            const ModelDims dims{8, 16, 12, 12};
            const GradCheckReport rep = gradient_check(dims, AttentionConfig{3, 2}, 20, 42);
            std::ostringstream os;
            os << rep.checked << " parameters, max relative error " << rep.max_rel_error << " at "
               << rep.worst_param;
            r.detail = os.str();
            r.passed = rep.max_rel_error < 1e-4;
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }

    {
        CheckResult r{"attention window structure", false, ""};
        try {
            Rng rng(7);
            bool ok = true;
            std::string why;
            for (int trial = 0; trial < 100 && ok; ++trial) {
                const int n = 1 + static_cast<int>(rng.index(40));
                const AttentionConfig att{static_cast<int>(rng.index(8)), static_cast<int>(rng.index(8))};
                const int t = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
                const AttentionWindow w = attention_window(t, n, att);
                if (w.backward_looking.lo != std::max(0, t - att.omega) || w.backward_looking.hi != t ||
                    w.forward_looking.lo != t || w.forward_looking.hi != std::min(n - 1, t + att.xi)) {
                    ok = false;
                    why = "window bounds wrong at t=" + std::to_string(t) + " n=" + std::to_string(n);
                }
            }
            // Softmax rows of a real forward pass must sum to one.
            const ModelDims dims{6, 8, 5, 5};
            const ModelParams params = init_params(dims, 3);
            Rng frng(11);
            const ForwardTrace tr = forward(params, random_features(frng, 9, 6, 0.0, 1.0), AttentionConfig{3, 2});
            for (const auto& row : tr.attn_fwd) {
                double sum = 0.0;
                for (double v : row) {
                    sum += v;
                    if (v <= 0.0) ok = false;
                }
                if (std::abs(sum - 1.0) > 1e-9) ok = false;
            }
            r.passed = ok;
            r.detail = ok ? "100 window draws + softmax normalization" : why;
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }

    {
        CheckResult r{"STFT round trip", false, ""};
        try {
            Rng rng(123);
            Waveform x;
            x.samples.resize(4096);
            for (double& s : x.samples) s = rng.uniform(-1.0, 1.0);
            const double snr = snr_db(x.samples, istft(stft(x, StftConfig{})).samples);
            r.detail = "reconstruction SNR " + std::to_string(snr) + " dB";
            r.passed = snr > 60.0;
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }

    {
        CheckResult r{"filter bank oracle", false, ""};
        try {
            const MelFilterBank bank = build_mel_bank(42, 257, 16000, 0.0, 8000.0);
            Rng rng(99);
            Waveform x;
            x.samples.resize(3000);
            for (double& s : x.samples) s = rng.uniform(-0.5, 0.5);
            const Spectrogram spec = stft(x, StftConfig{});
            const FeatureSequence feats = extract_fbank(spec, bank);

            double worst = 0.0;
            for (int t = 0; t < spec.n_frames; ++t) {
                for (int m = 0; m < bank.n_filters; ++m) {
                    double acc = 0.0;
                    for (int k = 0; k < bank.n_bins; ++k)
                        acc += bank.filters.at(m, k) * std::abs(spec.at(t, k));
                    worst = std::max(worst, std::abs(acc - feats.values.at(t, m)));
                }
            }
            r.detail = "max |fbank - dense oracle| = " + std::to_string(worst);
            r.passed = worst < 1e-10;
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }

    return results;
}

}  // namespace biatt
