#pragma once

#include <string>
#include <vector>

#include "biatt/model.hpp"
#include "biatt/types.hpp"

namespace biatt {

// Piecewise-constant SNR -> learning-rate map. Bands are evaluated top-down:
// the first band whose lower bound the SNR reaches wins; below all bounds the
// floor rate applies, so the map is total over the reals.
struct LrSchedule {
    struct Band {
        double min_snr_db;
        double rate;
    };
    std::vector<Band> bands;  // sorted by min_snr_db descending
    double floor_rate = 0.0;

    double rate_for(double snr_db) const;

    static LrSchedule snr_adaptive();  // 1e-6 / 1e-5 / 5e-5 / 1e-4 / 5e-4
    static LrSchedule constant(double rate);
};

double lr_for_snr(double snr_db);

struct TrainingExample {
    FeatureSequence noisy;
    FeatureSequence clean;
    double snr_db = 0.0;
    std::string id;
};

struct TrainConfig {
    int batch_size = 96;
    int epochs = 0;
    LrSchedule schedule = LrSchedule::snr_adaptive();
    double lr_scale = 1.0;  // multiplier on the schedule rates
    double dropout_rate = 0.2;
    double grad_clip_norm = 5.0;
    std::uint64_t seed = 0;
    int patience = 20;       // epochs without validation improvement before stopping
    bool use_adam = false;   // experimental; plain SGD by default
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct EpochStats {
    double mean_loss = 0.0;
    double mean_grad_norm = 0.0;
    double max_grad_norm = 0.0;
    int updates = 0;
};

struct LossCurvePoint {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double mean_grad_norm = 0.0;
};

struct TrainOutcome {
    ModelParams best_params;
    int best_epoch = -1;  // -1 when no epochs ran
    double best_val_mse = 0.0;
    std::vector<LossCurvePoint> curve;
    bool early_stopped = false;
};

// Optimizer state lives across epochs (Adam moments); for SGD it is empty.
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
    void apply(ModelParams& params, const Gradients& grads, double lr);

private:
    TrainConfig cfg_;
    std::vector<Tensor> m_, v_;
    long step_ = 0;
};

// One pass over the examples: seeded shuffle, batches of <= batch_size,
// per-example forward/backward (parallel across the batch), averaged and
// clipped gradients, one optimizer step per batch at the batch's mean
// SNR-scheduled rate. Throws NumericError on a non-finite loss.
EpochStats train_epoch(ModelParams& params, const std::vector<TrainingExample>& examples,
                       const TrainConfig& cfg, Rng& rng, Optimizer& opt, int epoch_index,
                       const AttentionConfig& att);

double validation_mse(const ModelParams& params, const std::vector<TrainingExample>& examples,
                      const AttentionConfig& att);

TrainOutcome train(ModelParams params, const AttentionConfig& att,
                   const std::vector<TrainingExample>& train_set,
                   const std::vector<TrainingExample>& validation_set, const TrainConfig& cfg);

void write_loss_curve_csv(const std::string& path, const std::vector<LossCurvePoint>& curve);

}  // namespace biatt
