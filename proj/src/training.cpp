#include "biatt/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace biatt {

double LrSchedule::rate_for(double snr_db) const {
    if (std::isnan(snr_db)) throw InvalidInput("learning-rate schedule: NaN SNR");
    for (const Band& b : bands)
        if (snr_db >= b.min_snr_db) return b.rate;
    return floor_rate;
}

LrSchedule LrSchedule::snr_adaptive() {
    LrSchedule s;
    s.bands = {{10.0, 1e-6}, {5.0, 1e-5}, {0.0, 5e-5}, {-5.0, 1e-4}};
    s.floor_rate = 5e-4;
    return s;
}

LrSchedule LrSchedule::constant(double rate) {
    LrSchedule s;
    s.floor_rate = rate;
    return s;
}

double lr_for_snr(double snr_db) { return LrSchedule::snr_adaptive().rate_for(snr_db); }

void Optimizer::apply(ModelParams& params, const Gradients& grads, double lr) {
    auto ents = params.entries();
    if (!cfg_.use_adam) {
        for (std::size_t i = 0; i < ents.size(); ++i) {
            Tensor& p = *ents[i].second;
            const Tensor& g = grads.tensors[i];
            for (int j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
        }
        return;
    }
    if (m_.empty()) {
        for (auto& [name, t] : ents) {
            m_.emplace_back(t->rows, t->cols);
            v_.emplace_back(t->rows, t->cols);
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < ents.size(); ++i) {
        Tensor& p = *ents[i].second;
        const Tensor& g = grads.tensors[i];
        for (int j = 0; j < p.size(); ++j) {
            m_[i][j] = cfg_.adam_beta1 * m_[i][j] + (1.0 - cfg_.adam_beta1) * g[j];
            v_[i][j] = cfg_.adam_beta2 * v_[i][j] + (1.0 - cfg_.adam_beta2) * g[j] * g[j];
            p[j] -= lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.adam_eps);
        }
    }
}

EpochStats train_epoch(ModelParams& params, const std::vector<TrainingExample>& examples,
                       const TrainConfig& cfg, Rng& rng, Optimizer& opt, int epoch_index,
                       const AttentionConfig& att) {
    if (examples.empty()) throw InvalidInput("train_epoch: no examples");
    if (cfg.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");

    const int n = static_cast<int>(examples.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.index(static_cast<std::size_t>(i) + 1)]);

    EpochStats stats;
    double loss_sum = 0.0;
    double norm_sum = 0.0;

    for (int start = 0; start < n; start += cfg.batch_size) {
        const int count = std::min(cfg.batch_size, n - start);
        std::vector<Gradients> grads(count);
        std::vector<double> losses(count);
        std::string failure;

        // Independent tapes per example; gradients are reduced serially below
        // in batch order, so the result does not depend on thread scheduling.
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < count; ++i) {
            try {
                const TrainingExample& ex = examples[order[start + i]];
                Rng ex_rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch_index),
                                       static_cast<std::uint64_t>(start + i)));
                ForwardPass fp(params, ex.noisy, att, cfg.dropout_rate, true, &ex_rng);
                losses[i] = fp.mse_loss(ex.clean);
                grads[i] = fp.backward();
            } catch (const std::exception& e) {
#pragma omp critical
                failure = e.what();
            }
        }
        if (!failure.empty()) throw NumericError("train_epoch: " + failure);

        Gradients batch_grad = Gradients::zeros_like(params);
        double lr_sum = 0.0;
        for (int i = 0; i < count; ++i) {
            const TrainingExample& ex = examples[order[start + i]];
            if (!std::isfinite(losses[i]))
                throw NumericError("train_epoch: non-finite loss on example '" + ex.id + "'");
            loss_sum += losses[i];
            batch_grad.add(grads[i]);
            lr_sum += cfg.lr_scale * cfg.schedule.rate_for(ex.snr_db);
        }
        batch_grad.scale(1.0 / count);

        const double raw_norm = batch_grad.global_norm();
        norm_sum += raw_norm;
        stats.max_grad_norm = std::max(stats.max_grad_norm, raw_norm);
        if (raw_norm > cfg.grad_clip_norm && raw_norm > 0.0)
            batch_grad.scale(cfg.grad_clip_norm / raw_norm);

        opt.apply(params, batch_grad, lr_sum / count);
        ++stats.updates;
    }

    stats.mean_loss = loss_sum / n;
    stats.mean_grad_norm = norm_sum / stats.updates;
    return stats;
}

double validation_mse(const ModelParams& params, const std::vector<TrainingExample>& examples,
                      const AttentionConfig& att) {
    if (examples.empty()) throw InvalidInput("validation_mse: no examples");
    const int n = static_cast<int>(examples.size());
    std::vector<double> losses(n);
    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            losses[i] = mse_loss(forward(params, examples[i].noisy, att), examples[i].clean);
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw NumericError("validation_mse: " + failure);
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / n;
}

TrainOutcome train(ModelParams params, const AttentionConfig& att,
                   const std::vector<TrainingExample>& train_set,
                   const std::vector<TrainingExample>& validation_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw InvalidInput("train: empty training set");
    if (validation_set.empty()) throw InvalidInput("train: empty validation set");

    TrainOutcome out;
    out.best_params = params;
    out.best_val_mse = std::numeric_limits<double>::infinity();

    Rng rng(cfg.seed);
    Optimizer opt(cfg);
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const EpochStats stats = train_epoch(params, train_set, cfg, rng, opt, epoch, att);
        const double val = validation_mse(params, validation_set, att);
        out.curve.push_back({epoch, stats.mean_loss, val, stats.mean_grad_norm});

        if (val < out.best_val_mse) {
            out.best_val_mse = val;
            out.best_params = params;
            out.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            out.early_stopped = true;
            break;
        }
    }
    return out;
}

void write_loss_curve_csv(const std::string& path, const std::vector<LossCurvePoint>& curve) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write loss curve: " + path);
    f << "epoch,train_mse,val_mse,mean_grad_norm\n";
    f.precision(17);
    for (const LossCurvePoint& p : curve)
        f << p.epoch << ',' << p.train_mse << ',' << p.val_mse << ',' << p.mean_grad_norm << '\n';
    if (!f) throw IoError("loss curve write failed: " + path);
}

}  // namespace biatt
