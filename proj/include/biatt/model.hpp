#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biatt/tape.hpp"
#include "biatt/types.hpp"

namespace biatt {

// Windowed attention reach: omega frames back, xi frames ahead of the focal
// frame. Both windows include the focal frame itself.
struct AttentionConfig {
    int omega = 15;
    int xi = 5;

    void validate() const {
        if (omega < 0 || xi < 0) throw InvalidConfig("attention window lengths must be >= 0");
    }
};

struct ModelDims {
    int feature = 42;
    int encoder_out = 128;
    int hidden = 350;
    int e_dim = 350;

    void validate() const {
        if (feature < 1 || encoder_out < 1 || hidden < 1 || e_dim < 1)
            throw InvalidConfig("model dimensions must be positive");
    }
};

struct DenseParams {
    Tensor W;
    Tensor b;
};

struct LstmCellParams {
    Tensor Wi, Wf, Wo, Wg;  // hidden x input
    Tensor Ui, Uf, Uo, Ug;  // hidden x hidden
    Tensor bi, bf, bo, bg;  // hidden
};

// All trainable weights. `entries()` fixes the canonical order used by the
// checkpoint format and by gradient stores.
struct ModelParams {
    ModelDims dims;
    DenseParams encoder;        // encoder_out x feature
    LstmCellParams key_fwd, key_bwd, query_fwd, query_bwd;
    Tensor score_fwd, score_bwd;            // hidden x hidden bilinear matrices
    DenseParams query_dense_fwd, query_dense_bwd;  // hidden x hidden
    DenseParams decoder;        // e_dim x 4*hidden
    DenseParams gain;           // feature x e_dim

    std::vector<std::pair<std::string, Tensor*>> entries();
    std::vector<std::pair<std::string, const Tensor*>> entries() const;
};

// Glorot-uniform weights, zero biases except LSTM forget-gate biases at 1.0.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

struct WindowRange {
    int lo = 0;
    int hi = 0;
    int size() const { return hi - lo + 1; }
};

struct AttentionWindow {
    WindowRange backward_looking;  // [max(0, t-omega) .. t]
    WindowRange forward_looking;   // [t .. min(n-1, t+xi)]
};

AttentionWindow attention_window(int t, int n_frames, const AttentionConfig& cfg);

// Gradient store: one tensor per parameter, in ModelParams::entries() order.
struct Gradients {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    static Gradients zeros_like(const ModelParams& params);
    double global_norm() const;
    void scale(double s);
    void add(const Gradients& other);
};

// Plain-value record of one forward run.
struct ForwardTrace {
    Tensor encoded;                    // T x encoder_out
    Tensor keys_fwd, keys_bwd;         // T x hidden
    Tensor queries_fwd, queries_bwd;   // T x hidden (post query-dense)
    std::vector<std::vector<double>> attn_fwd;  // row t: weights over [max(0,t-omega) .. t]
    std::vector<std::vector<double>> attn_bwd;  // row t: weights over [t .. min(N-1,t+xi)]
    Tensor contexts;                   // T x 2*hidden
    Tensor enhancement;                // T x e_dim
    GainSequence gains;
    FeatureSequence output;
    AttentionConfig att;
};

// Tape-bound forward pass; use it when gradients are needed.
class ForwardPass {
public:
    ForwardPass(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att,
                double dropout_rate = 0.0, bool training = false, Rng* rng = nullptr);

    // Mean over all T x F entries of (y - clean)^2; builds the loss node.
    double mse_loss(const FeatureSequence& clean);

    // Reverse sweep from the loss node; mse_loss() must have been called.
    Gradients backward();

    GainSequence gains() const;
    FeatureSequence output() const;
    ForwardTrace trace() const;

    const nn::Tape& tape() const { return tape_; }

private:
    const ModelParams& params_;
    AttentionConfig att_;
    int frames_;
    nn::Tape tape_;
    std::vector<nn::NodeId> param_ids_;  // entries() order
    std::vector<nn::NodeId> encoded_, keys_f_, keys_b_, queries_f_, queries_b_;
    std::vector<nn::NodeId> attn_f_, attn_b_, contexts_, enhance_, gains_, outputs_;
    std::optional<nn::NodeId> loss_;
};

ForwardTrace forward(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att,
                     double dropout_rate = 0.0, bool training = false, Rng* rng = nullptr);

GainSequence predict_gains(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att);

double mse_loss(const ForwardTrace& trace, const FeatureSequence& clean);

// Dense attention matrices for dumping: forward T x (omega+1), backward
// T x (xi+1); cells outside the clipped window are NaN (written as empty CSV
// cells).
struct AttentionDump {
    Tensor forward_weights;
    Tensor backward_weights;
};

AttentionDump export_attention(const ForwardTrace& trace);

// Versioned checkpoint container. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params, const AttentionConfig& att);
std::pair<ModelParams, AttentionConfig> load_checkpoint(const std::string& path);

}  // namespace biatt
