#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "biatt/csv.hpp"
#include "biatt/data.hpp"
#include "biatt/enhance.hpp"
#include "biatt/eval.hpp"
#include "biatt/model.hpp"
#include "biatt/selftest.hpp"
#include "biatt/training.hpp"

namespace fs = std::filesystem;
using namespace biatt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell.empty()) continue;
        out.push_back(std::stod(cell));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_number_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

struct TrainFlags {
    std::string manifest;
    std::string out_dir = ".";
    int omega = 15;
    int xi = 5;
    int hidden = 350;
    int encoder_out = 128;
    int e_dim = 350;
    int feature = 42;
    double dropout = 0.2;
    int epochs = 50;
    int batch = 96;
    std::uint64_t seed = 0;
    int patience = 20;
    bool adam = false;
    double lr_scale = 1.0;
    double f_low = 0.0;
    double f_high = 8000.0;
};

void add_model_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--omega", f.omega, "Backward-looking attention window length");
    cmd->add_option("--xi", f.xi, "Forward-looking attention window length");
    cmd->add_option("--hidden", f.hidden, "LSTM hidden size");
    cmd->add_option("--encoder-out", f.encoder_out, "Encoder output dimension");
    cmd->add_option("--e-dim", f.e_dim, "Enhancement vector dimension");
    cmd->add_option("--feature", f.feature, "FBank dimension");
    cmd->add_option("--dropout", f.dropout, "Dropout rate during training");
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--batch", f.batch, "Batch size");
    cmd->add_option("--seed", f.seed, "RNG seed");
    cmd->add_option("--patience", f.patience, "Early-stop patience in epochs (0 disables)");
    cmd->add_flag("--adam", f.adam, "Use Adam instead of plain SGD (experimental)");
    cmd->add_option("--lr-scale", f.lr_scale, "Multiplier on the SNR-scheduled learning rates");
    cmd->add_option("--f-low", f.f_low, "Filter bank lower edge in Hz");
    cmd->add_option("--f-high", f.f_high, "Filter bank upper edge in Hz");
}

int cmd_make_toy_data(int n, std::uint64_t seed, const std::string& out_dir, const std::string& snrs,
                      double split_ratio) {
    ToyCorpusConfig cfg;
    cfg.n_utterances = n;
    cfg.seed = seed;
    cfg.train_ratio = split_ratio;
    if (!snrs.empty()) cfg.snr_choices = parse_number_list(snrs);
    const Manifest manifest = make_toy_corpus(cfg, out_dir);
    const std::string path = (fs::path(out_dir) / "manifest.csv").string();
    std::cout << "wrote " << manifest.entries.size() << " utterances, manifest at " << path << "\n";
    return kExitOk;
}

int cmd_train(const TrainFlags& f) {
    std::cout << "train config: omega=" << f.omega << " xi=" << f.xi << " hidden=" << f.hidden
              << " encoder_out=" << f.encoder_out << " e_dim=" << f.e_dim << " feature=" << f.feature
              << " batch=" << f.batch << " dropout=" << f.dropout << " epochs=" << f.epochs
              << " seed=" << f.seed << (f.adam ? " optimizer=adam" : " optimizer=sgd") << "\n";

    const Manifest manifest = load_manifest(f.manifest);
    const StftConfig stft_cfg;
    const MelFilterBank bank = build_mel_bank(f.feature, stft_cfg.bins(), 16000, f.f_low, f.f_high);

    auto train_set = load_examples(manifest, "train", stft_cfg, bank);
    auto val_set = load_examples(manifest, "test", stft_cfg, bank);
    if (train_set.empty()) throw InvalidInput("manifest has no train rows");
    if (val_set.empty()) {
        std::cout << "note: manifest has no test rows; validating on the training set\n";
        val_set = train_set;
    }

    const ModelDims dims{f.feature, f.encoder_out, f.hidden, f.e_dim};
    const AttentionConfig att{f.omega, f.xi};
    TrainConfig cfg;
    cfg.batch_size = f.batch;
    cfg.epochs = f.epochs;
    cfg.dropout_rate = f.dropout;
    cfg.seed = f.seed;
    cfg.patience = f.patience;
    cfg.use_adam = f.adam;
    cfg.lr_scale = f.lr_scale;

    const TrainOutcome outcome = train(init_params(dims, f.seed), att, train_set, val_set, cfg);

    fs::create_directories(f.out_dir);
    const std::string ckpt = (fs::path(f.out_dir) / "checkpoint.biatt").string();
    const std::string curve = (fs::path(f.out_dir) / "loss_curve.csv").string();
    save_checkpoint(ckpt, outcome.best_params, att);
    write_loss_curve_csv(curve, outcome.curve);

    if (outcome.curve.empty()) {
        std::cout << "no epochs run; checkpoint equals initialization\n";
    } else {
        std::cout << "best epoch " << outcome.best_epoch << " val_mse " << outcome.best_val_mse
                  << (outcome.early_stopped ? " (early stop)" : "") << "\n";
    }
    std::cout << "checkpoint: " << ckpt << "\nloss curve: " << curve << "\n";
    return kExitOk;
}

void enhance_one(const ModelParams& params, const AttentionConfig& att, const StftConfig& stft_cfg,
                 const MelFilterBank& bank, const std::string& in_path, const std::string& out_path,
                 bool dump_attention, bool dump_gains, bool dump_features) {
    const Waveform noisy = read_wav(in_path);
    validate_pipeline_input(noisy);
    const EnhanceResult result = enhance(params, att, noisy, stft_cfg, bank, dump_attention);
    write_wav(out_path, result.wave);

    const std::string stem = (fs::path(out_path).parent_path() /
                              fs::path(out_path).stem()).string();
    if (dump_gains) {
        write_matrix_csv(stem + "_gains_bands.csv", result.gains.values, "band");
        write_matrix_csv(stem + "_gains_bins.csv", result.bin_gains, "bin");
    }
    if (dump_features) {
        const FeatureSequence feats = extract_fbank(stft(noisy, stft_cfg), bank);
        write_matrix_csv(stem + "_fbank.csv", feats.values, "band");
    }
    if (dump_attention) {
        const AttentionDump dump = export_attention(*result.trace);
        write_matrix_csv(stem + "_attention_forward.csv", dump.forward_weights, "w", -att.omega);
        write_matrix_csv(stem + "_attention_backward.csv", dump.backward_weights, "w", 0);
    }
}

int cmd_enhance(const std::string& checkpoint, const std::string& in_path, const std::string& out_path,
                const std::string& in_dir, const std::string& out_dir, bool dump_attention,
                bool dump_gains, bool dump_features, double f_low, double f_high) {
    if (in_path.empty() == in_dir.empty())
        throw InvalidConfig("enhance: provide exactly one of --in or --in-dir");

    auto [params, att] = load_checkpoint(checkpoint);
    const StftConfig stft_cfg;
    const MelFilterBank bank = build_mel_bank(params.dims.feature, stft_cfg.bins(), 16000, f_low, f_high);

    if (!in_path.empty()) {
        enhance_one(params, att, stft_cfg, bank, in_path, out_path, dump_attention, dump_gains, dump_features);
        std::cout << "enhanced " << in_path << " -> " << out_path << "\n";
        return kExitOk;
    }

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(in_dir))
        if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InvalidInput("no .wav files in " + in_dir);
    fs::create_directories(out_dir);

    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(files.size()); ++i) {
        try {
            const std::string out = (fs::path(out_dir) / fs::path(files[i]).filename()).string();
            enhance_one(params, att, stft_cfg, bank, files[i], out, dump_attention, dump_gains, dump_features);
        } catch (const std::exception& e) {
#pragma omp critical
            failure = files[i] + ": " + e.what();
        }
    }
    if (!failure.empty()) throw InvalidInput(failure);
    std::cout << "enhanced " << files.size() << " files into " << out_dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& manifest_path, const std::string& split_tag,
                 const std::string& out_path, double f_low, double f_high) {
    auto [params, att] = load_checkpoint(checkpoint);
    const Manifest manifest = load_manifest(manifest_path);
    const StftConfig stft_cfg;
    const MelFilterBank bank = build_mel_bank(params.dims.feature, stft_cfg.bins(), 16000, f_low, f_high);

    const MetricReport report = evaluate_corpus(params, att, manifest, split_tag, stft_cfg, bank);
    write_metric_report_csv(out_path, report);

    if (report.rows.empty()) std::cout << "warning: no rows matched split '" << split_tag << "'\n";
    if (report.skipped > 0) std::cout << "warning: " << report.skipped << " rows skipped\n";
    for (const auto& [snr, b] : report.buckets)
        std::cout << "snr " << snr << " dB: seg-SNR " << b.seg_snr_noisy << " -> " << b.seg_snr_enhanced
                  << " dB, LSD " << b.lsd_noisy << " -> " << b.lsd_enhanced << " dB (" << b.count << " files)\n";
    std::cout << "report: " << out_path << "\n";
    return kExitOk;
}

int cmd_selftest() {
    const std::vector<CheckResult> results = run_selftest();
    bool all_ok = true;
    for (const CheckResult& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all_ok = all_ok && r.passed;
    }
    return all_ok ? kExitOk : kExitNumeric;
}

int cmd_sweep(const TrainFlags& f, const std::string& omegas, const std::string& xis,
              const std::string& out_path) {
    const Manifest manifest = load_manifest(f.manifest);
    const StftConfig stft_cfg;
    const MelFilterBank bank = build_mel_bank(f.feature, stft_cfg.bins(), 16000, f.f_low, f.f_high);

    SweepConfig cfg;
    cfg.omegas = parse_int_list(omegas);
    cfg.xis = parse_int_list(xis);
    cfg.dims = ModelDims{f.feature, f.encoder_out, f.hidden, f.e_dim};
    cfg.stft = stft_cfg;
    cfg.train.batch_size = f.batch;
    cfg.train.epochs = f.epochs;
    cfg.train.dropout_rate = f.dropout;
    cfg.train.seed = f.seed;
    cfg.train.patience = f.patience;
    cfg.train.use_adam = f.adam;
    cfg.train.lr_scale = f.lr_scale;

    const SweepResult result = sweep_windows(manifest, cfg, bank);
    write_sweep_csv(out_path, result);

    for (std::size_t i = 0; i < result.omegas.size(); ++i)
        for (std::size_t j = 0; j < result.xis.size(); ++j)
            std::cout << "omega=" << result.omegas[i] << " xi=" << result.xis[j] << ": seg-SNR improvement "
                      << result.improvement.at(static_cast<int>(i), static_cast<int>(j)) << " dB\n";
    std::cout << "grid: " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional attention speech enhancement"};
    app.require_subcommand(1);

    // make-toy-data
    int toy_n = 50;
    std::uint64_t toy_seed = 0;
    std::string toy_out;
    std::string toy_snrs;
    double toy_ratio = 0.8;
    CLI::App* make_toy = app.add_subcommand("make-toy-data", "Generate a synthetic corpus + manifest");
    make_toy->add_option("--n", toy_n, "Number of utterances");
    make_toy->add_option("--seed", toy_seed, "RNG seed");
    make_toy->add_option("--out", toy_out, "Output directory")->required();
    make_toy->add_option("--snrs", toy_snrs, "Comma-separated SNR choices in dB (default -10,-5,0,5,10)");
    make_toy->add_option("--split-ratio", toy_ratio, "Train fraction (4:1 default)");

    // train
    TrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a manifest");
    train_cmd->add_option("--manifest", train_flags.manifest, "Manifest CSV")->required();
    train_cmd->add_option("--out", train_flags.out_dir, "Output directory for checkpoint + curves");
    add_model_flags(train_cmd, train_flags);

    // enhance / dump-attention
    std::string enh_checkpoint, enh_in, enh_out, enh_in_dir, enh_out_dir;
    bool enh_dump_attention = false, enh_dump_gains = false, enh_dump_features = false;
    double enh_f_low = 0.0, enh_f_high = 8000.0;
    auto add_enhance_flags = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", enh_checkpoint, "Model checkpoint")->required();
        auto* in = cmd->add_option("--in", enh_in, "Input noisy WAV");
        auto* out = cmd->add_option("--out", enh_out, "Output enhanced WAV");
        auto* ind = cmd->add_option("--in-dir", enh_in_dir, "Directory of noisy WAVs");
        auto* outd = cmd->add_option("--out-dir", enh_out_dir, "Directory for enhanced WAVs");
        in->excludes(ind);
        in->needs(out);
        ind->needs(outd);
        cmd->add_flag("--dump-gains", enh_dump_gains, "Write band and bin gain CSVs");
        cmd->add_flag("--dump-features", enh_dump_features, "Write the noisy FBank CSV");
        cmd->add_option("--f-low", enh_f_low, "Filter bank lower edge in Hz");
        cmd->add_option("--f-high", enh_f_high, "Filter bank upper edge in Hz");
    };
    CLI::App* enhance_cmd = app.add_subcommand("enhance", "Enhance a WAV file or directory");
    add_enhance_flags(enhance_cmd);
    enhance_cmd->add_flag("--dump-attention", enh_dump_attention, "Write attention weight CSVs");
    CLI::App* dump_cmd = app.add_subcommand("dump-attention", "Enhance and always dump attention weights");
    add_enhance_flags(dump_cmd);

    // evaluate
    std::string eval_checkpoint, eval_manifest, eval_out = "metrics.csv", eval_split = "test";
    double eval_f_low = 0.0, eval_f_high = 8000.0;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint against a manifest split");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "Model checkpoint")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Manifest CSV")->required();
    eval_cmd->add_option("--split", eval_split, "Split tag to score (empty = all rows)");
    eval_cmd->add_option("--out", eval_out, "Report CSV path");
    eval_cmd->add_option("--f-low", eval_f_low, "Filter bank lower edge in Hz");
    eval_cmd->add_option("--f-high", eval_f_high, "Filter bank upper edge in Hz");

    // selftest
    CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the built-in verification suite");

    // sweep
    TrainFlags sweep_flags;
    sweep_flags.epochs = 30;
    sweep_flags.hidden = 32;
    sweep_flags.encoder_out = 48;
    sweep_flags.e_dim = 48;
    sweep_flags.batch = 1;
    std::string sweep_omegas = "0,5,15", sweep_xis = "0,5", sweep_out = "sweep_grid.csv";
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Train and score a grid of (omega, xi) windows");
    sweep_cmd->add_option("--manifest", sweep_flags.manifest, "Manifest CSV")->required();
    sweep_cmd->add_option("--omegas", sweep_omegas, "Comma-separated omega values");
    sweep_cmd->add_option("--xis", sweep_xis, "Comma-separated xi values");
    sweep_cmd->add_option("--out", sweep_out, "Grid CSV path");
    add_model_flags(sweep_cmd, sweep_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (make_toy->parsed())
            return cmd_make_toy_data(toy_n, toy_seed, toy_out, toy_snrs, toy_ratio);
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (enhance_cmd->parsed())
            return cmd_enhance(enh_checkpoint, enh_in, enh_out, enh_in_dir, enh_out_dir,
                               enh_dump_attention, enh_dump_gains, enh_dump_features, enh_f_low, enh_f_high);
        if (dump_cmd->parsed())
            return cmd_enhance(enh_checkpoint, enh_in, enh_out, enh_in_dir, enh_out_dir, true,
                               enh_dump_gains, enh_dump_features, enh_f_low, enh_f_high);
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_checkpoint, eval_manifest, eval_split, eval_out, eval_f_low, eval_f_high);
        if (selftest_cmd->parsed()) return cmd_selftest();
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_omegas, sweep_xis, sweep_out);
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
