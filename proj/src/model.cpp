#include "biatt/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace biatt {

namespace {

void lstm_entries(const std::string& prefix, LstmCellParams& p,
                  std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back(prefix + ".Wi", &p.Wi);
    out.emplace_back(prefix + ".Wf", &p.Wf);
    out.emplace_back(prefix + ".Wo", &p.Wo);
    out.emplace_back(prefix + ".Wg", &p.Wg);
    out.emplace_back(prefix + ".Ui", &p.Ui);
    out.emplace_back(prefix + ".Uf", &p.Uf);
    out.emplace_back(prefix + ".Uo", &p.Uo);
    out.emplace_back(prefix + ".Ug", &p.Ug);
    out.emplace_back(prefix + ".bi", &p.bi);
    out.emplace_back(prefix + ".bf", &p.bf);
    out.emplace_back(prefix + ".bo", &p.bo);
    out.emplace_back(prefix + ".bg", &p.bg);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::entries() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.reserve(60);
    out.emplace_back("encoder.W", &encoder.W);
    out.emplace_back("encoder.b", &encoder.b);
    lstm_entries("key_fwd", key_fwd, out);
    lstm_entries("key_bwd", key_bwd, out);
    lstm_entries("query_fwd", query_fwd, out);
    lstm_entries("query_bwd", query_bwd, out);
    out.emplace_back("score_fwd", &score_fwd);
    out.emplace_back("score_bwd", &score_bwd);
    out.emplace_back("query_dense_fwd.W", &query_dense_fwd.W);
    out.emplace_back("query_dense_fwd.b", &query_dense_fwd.b);
    out.emplace_back("query_dense_bwd.W", &query_dense_bwd.W);
    out.emplace_back("query_dense_bwd.b", &query_dense_bwd.b);
    out.emplace_back("decoder.W", &decoder.W);
    out.emplace_back("decoder.b", &decoder.b);
    out.emplace_back("gain.W", &gain.W);
    out.emplace_back("gain.b", &gain.b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::entries() const {
    auto mut = const_cast<ModelParams*>(this)->entries();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) out.emplace_back(name, t);
    return out;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    Rng rng(seed);

    auto glorot = [&](int rows, int cols) {
        Tensor t(rows, cols);
        const double limit = std::sqrt(6.0 / (rows + cols));
        for (double& x : t.v) x = rng.uniform(-limit, limit);
        return t;
    };
    auto lstm = [&](int input) {
        LstmCellParams p;
        const int h = dims.hidden;
        p.Wi = glorot(h, input);
        p.Wf = glorot(h, input);
        p.Wo = glorot(h, input);
        p.Wg = glorot(h, input);
        p.Ui = glorot(h, h);
        p.Uf = glorot(h, h);
        p.Uo = glorot(h, h);
        p.Ug = glorot(h, h);
        p.bi = Tensor::vec(h);
        p.bf = Tensor::vec(h);
        p.bo = Tensor::vec(h);
        p.bg = Tensor::vec(h);
        for (double& x : p.bf.v) x = 1.0;  // open forget gates at start
        return p;
    };

    ModelParams m;
    m.dims = dims;
    m.encoder = {glorot(dims.encoder_out, dims.feature), Tensor::vec(dims.encoder_out)};
    m.key_fwd = lstm(dims.encoder_out);
    m.key_bwd = lstm(dims.encoder_out);
    m.query_fwd = lstm(dims.encoder_out);
    m.query_bwd = lstm(dims.encoder_out);
    m.score_fwd = glorot(dims.hidden, dims.hidden);
    m.score_bwd = glorot(dims.hidden, dims.hidden);
    m.query_dense_fwd = {glorot(dims.hidden, dims.hidden), Tensor::vec(dims.hidden)};
    m.query_dense_bwd = {glorot(dims.hidden, dims.hidden), Tensor::vec(dims.hidden)};
    m.decoder = {glorot(dims.e_dim, 4 * dims.hidden), Tensor::vec(dims.e_dim)};
    m.gain = {glorot(dims.feature, dims.e_dim), Tensor::vec(dims.feature)};
    return m;
}

AttentionWindow attention_window(int t, int n_frames, const AttentionConfig& cfg) {
    cfg.validate();
    if (t < 0 || t >= n_frames) throw InvalidInput("attention_window: frame index out of range");
    AttentionWindow w;
    w.backward_looking = {std::max(0, t - cfg.omega), t};
    w.forward_looking = {t, std::min(n_frames - 1, t + cfg.xi)};
    return w;
}

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    for (const auto& [name, t] : params.entries()) {
        g.names.push_back(name);
        g.tensors.emplace_back(t->rows, t->cols);
    }
    return g;
}

double Gradients::global_norm() const {
    double acc = 0.0;
    for (const Tensor& t : tensors)
        for (double x : t.v) acc += x * x;
    return std::sqrt(acc);
}

void Gradients::scale(double s) {
    for (Tensor& t : tensors)
        for (double& x : t.v) x *= s;
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < tensors.size(); ++i)
        for (int j = 0; j < tensors[i].size(); ++j) tensors[i][j] += other.tensors[i][j];
}

ForwardPass::ForwardPass(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att,
                         double dropout_rate, bool training, Rng* rng)
    : params_(params), att_(att), frames_(x.frames()) {
    att.validate();
    params.dims.validate();
    if (frames_ < 1) throw InvalidInput("forward: empty feature sequence");
    if (x.bands() != params.dims.feature)
        throw InvalidInput("forward: feature dimension mismatch (got " + std::to_string(x.bands()) +
                           ", model expects " + std::to_string(params.dims.feature) + ")");
    if (training && dropout_rate > 0.0 && rng == nullptr)
        throw InvalidConfig("forward: training with dropout needs an RNG");

    using namespace nn;
    const int T = frames_;
    const int hidden = params.dims.hidden;

    // Register every parameter once, in canonical order; named ids drive the
    // graph, the flat list drives gradient extraction.
    std::vector<std::pair<std::string, const Tensor*>> ents = params.entries();
    param_ids_.reserve(ents.size());
    std::size_t cursor = 0;
    auto next_id = [&](const char* expect) {
        const auto& [name, tensor] = ents[cursor];
        if (name != expect) throw NumericError("parameter order mismatch: " + name + " vs " + expect);
        NodeId id = tape_.leaf(*tensor);
        param_ids_.push_back(id);
        ++cursor;
        return id;
    };
    auto next_lstm = [&](const std::string& prefix) {
        LstmNodeIds ids;
        ids.Wi = next_id((prefix + ".Wi").c_str());
        ids.Wf = next_id((prefix + ".Wf").c_str());
        ids.Wo = next_id((prefix + ".Wo").c_str());
        ids.Wg = next_id((prefix + ".Wg").c_str());
        ids.Ui = next_id((prefix + ".Ui").c_str());
        ids.Uf = next_id((prefix + ".Uf").c_str());
        ids.Uo = next_id((prefix + ".Uo").c_str());
        ids.Ug = next_id((prefix + ".Ug").c_str());
        ids.bi = next_id((prefix + ".bi").c_str());
        ids.bf = next_id((prefix + ".bf").c_str());
        ids.bo = next_id((prefix + ".bo").c_str());
        ids.bg = next_id((prefix + ".bg").c_str());
        return ids;
    };

    const NodeId enc_w = next_id("encoder.W");
    const NodeId enc_b = next_id("encoder.b");
    const LstmNodeIds key_f = next_lstm("key_fwd");
    const LstmNodeIds key_b = next_lstm("key_bwd");
    const LstmNodeIds query_f = next_lstm("query_fwd");
    const LstmNodeIds query_b = next_lstm("query_bwd");
    const NodeId score_f = next_id("score_fwd");
    const NodeId score_b = next_id("score_bwd");
    const NodeId qdense_f_w = next_id("query_dense_fwd.W");
    const NodeId qdense_f_b = next_id("query_dense_fwd.b");
    const NodeId qdense_b_w = next_id("query_dense_bwd.W");
    const NodeId qdense_b_b = next_id("query_dense_bwd.b");
    const NodeId dec_w = next_id("decoder.W");
    const NodeId dec_b = next_id("decoder.b");
    const NodeId gain_w = next_id("gain.W");
    const NodeId gain_b = next_id("gain.b");

    // Per-frame input constants.
    std::vector<NodeId> inputs(T);
    for (int t = 0; t < T; ++t) {
        Tensor xt = Tensor::vec(params.dims.feature);
        for (int f = 0; f < params.dims.feature; ++f) xt[f] = x.values.at(t, f);
        inputs[t] = tape_.constant(xt);
    }

    // Encoder, with dropout on its output while training.
    encoded_.resize(T);
    for (int t = 0; t < T; ++t) {
        NodeId e = dense(tape_, inputs[t], enc_w, enc_b, Activation::Tanh);
        if (training) e = tape_.dropout(e, dropout_rate, *rng, true);
        encoded_[t] = e;
    }

    keys_f_ = run_lstm(tape_, key_f, encoded_, hidden, Direction::Forward);
    keys_b_ = run_lstm(tape_, key_b, encoded_, hidden, Direction::Backward);
    std::vector<NodeId> raw_q_f = run_lstm(tape_, query_f, encoded_, hidden, Direction::Forward);
    std::vector<NodeId> raw_q_b = run_lstm(tape_, query_b, encoded_, hidden, Direction::Backward);

    // Final queries pass through a dense layer.
    queries_f_.resize(T);
    queries_b_.resize(T);
    for (int t = 0; t < T; ++t) {
        queries_f_[t] = dense(tape_, raw_q_f[t], qdense_f_w, qdense_f_b, Activation::Tanh);
        queries_b_[t] = dense(tape_, raw_q_b[t], qdense_b_w, qdense_b_b, Activation::Tanh);
    }

    attn_f_.resize(T);
    attn_b_.resize(T);
    contexts_.resize(T);
    enhance_.resize(T);
    gains_.resize(T);
    outputs_.resize(T);

    for (int t = 0; t < T; ++t) {
        const AttentionWindow win = attention_window(t, T, att);

        auto attention = [&](const WindowRange& range, const std::vector<NodeId>& keys,
                             NodeId score_w, NodeId query) {
            const NodeId wq = tape_.matvec(score_w, query);
            std::vector<NodeId> scores(range.size());
            for (int k = range.lo; k <= range.hi; ++k)
                scores[k - range.lo] = tape_.dot(keys[k], wq);
            const NodeId weights = tape_.softmax(tape_.concat(scores));
            std::vector<NodeId> window_keys(keys.begin() + range.lo, keys.begin() + range.hi + 1);
            const NodeId ctx = tape_.attend(weights, window_keys);
            return std::pair<NodeId, NodeId>{weights, ctx};
        };

        auto [alpha, ctx_f] = attention(win.backward_looking, keys_f_, score_f, queries_f_[t]);
        auto [gamma, ctx_b] = attention(win.forward_looking, keys_b_, score_b, queries_b_[t]);
        attn_f_[t] = alpha;
        attn_b_[t] = gamma;
        contexts_[t] = tape_.concat(std::array{ctx_f, ctx_b});

        const NodeId dec_in = tape_.concat(std::array{contexts_[t], queries_f_[t], queries_b_[t]});
        NodeId e = dense(tape_, dec_in, dec_w, dec_b, Activation::Tanh);
        if (training) e = tape_.dropout(e, dropout_rate, *rng, true);
        enhance_[t] = e;

        gains_[t] = dense(tape_, e, gain_w, gain_b, Activation::Sigmoid);
        outputs_[t] = tape_.hadamard(inputs[t], gains_[t]);
    }
}

double ForwardPass::mse_loss(const FeatureSequence& clean) {
    if (clean.frames() != frames_ || clean.bands() != params_.dims.feature)
        throw InvalidInput("mse_loss: clean feature shape mismatch");
    if (!loss_) {
        std::vector<nn::NodeId> frame_losses(frames_);
        for (int t = 0; t < frames_; ++t) {
            Tensor ct = Tensor::vec(params_.dims.feature);
            for (int f = 0; f < params_.dims.feature; ++f) ct[f] = clean.values.at(t, f);
            frame_losses[t] = tape_.sum_squares(tape_.sub(outputs_[t], tape_.constant(ct)));
        }
        const double denom = static_cast<double>(frames_) * params_.dims.feature;
        loss_ = tape_.scale(tape_.sum_scalars(frame_losses), 1.0 / denom);
    }
    return tape_.value(*loss_)[0];
}

Gradients ForwardPass::backward() {
    if (!loss_) throw InvalidInput("backward: call mse_loss first");
    tape_.backward(*loss_);
    Gradients g = Gradients::zeros_like(params_);
    for (std::size_t i = 0; i < param_ids_.size(); ++i) g.tensors[i] = tape_.grad(param_ids_[i]);
    return g;
}

GainSequence ForwardPass::gains() const {
    GainSequence g(frames_, params_.dims.feature);
    for (int t = 0; t < frames_; ++t) {
        const Tensor& v = tape_.value(gains_[t]);
        for (int f = 0; f < params_.dims.feature; ++f) g.values.at(t, f) = v[f];
    }
    return g;
}

FeatureSequence ForwardPass::output() const {
    FeatureSequence y(frames_, params_.dims.feature);
    for (int t = 0; t < frames_; ++t) {
        const Tensor& v = tape_.value(outputs_[t]);
        for (int f = 0; f < params_.dims.feature; ++f) y.values.at(t, f) = v[f];
    }
    return y;
}

ForwardTrace ForwardPass::trace() const {
    ForwardTrace tr;
    tr.att = att_;
    const int T = frames_;
    const int hidden = params_.dims.hidden;

    auto gather = [&](const std::vector<nn::NodeId>& ids, int cols) {
        Tensor m(T, cols);
        for (int t = 0; t < T; ++t) {
            const Tensor& v = tape_.value(ids[t]);
            for (int c = 0; c < cols; ++c) m.at(t, c) = v[c];
        }
        return m;
    };

    tr.encoded = gather(encoded_, params_.dims.encoder_out);
    tr.keys_fwd = gather(keys_f_, hidden);
    tr.keys_bwd = gather(keys_b_, hidden);
    tr.queries_fwd = gather(queries_f_, hidden);
    tr.queries_bwd = gather(queries_b_, hidden);
    tr.contexts = gather(contexts_, 2 * hidden);
    tr.enhancement = gather(enhance_, params_.dims.e_dim);
    tr.gains = gains();
    tr.output = output();

    tr.attn_fwd.resize(T);
    tr.attn_bwd.resize(T);
    for (int t = 0; t < T; ++t) {
        tr.attn_fwd[t] = tape_.value(attn_f_[t]).v;
        tr.attn_bwd[t] = tape_.value(attn_b_[t]).v;
    }
    return tr;
}

ForwardTrace forward(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att,
                     double dropout_rate, bool training, Rng* rng) {
    return ForwardPass(params, x, att, dropout_rate, training, rng).trace();
}

GainSequence predict_gains(const ModelParams& params, const FeatureSequence& x, const AttentionConfig& att) {
    return ForwardPass(params, x, att).gains();
}

double mse_loss(const ForwardTrace& trace, const FeatureSequence& clean) {
    const Tensor& y = trace.output.values;
    if (y.rows != clean.frames() || y.cols != clean.bands())
        throw InvalidInput("mse_loss: shape mismatch");
    // Same accumulation order as the tape path: per-frame sum of squares,
    // then summed over frames, then scaled.
    double total = 0.0;
    for (int t = 0; t < y.rows; ++t) {
        double frame = 0.0;
        for (int f = 0; f < y.cols; ++f) {
            const double d = y.at(t, f) - clean.values.at(t, f);
            frame += d * d;
        }
        total += frame;
    }
    return total / (static_cast<double>(y.rows) * y.cols);
}

AttentionDump export_attention(const ForwardTrace& trace) {
    const int T = static_cast<int>(trace.attn_fwd.size());
    const double pad = std::numeric_limits<double>::quiet_NaN();

    AttentionDump dump;
    dump.forward_weights = Tensor(T, trace.att.omega + 1);
    dump.backward_weights = Tensor(T, trace.att.xi + 1);
    for (double& x : dump.forward_weights.v) x = pad;
    for (double& x : dump.backward_weights.v) x = pad;

    for (int t = 0; t < T; ++t) {
        // Forward: column j holds weight for frame t-omega+j; left-padded when
        // the window clips at the sequence start.
        const int lo_f = std::max(0, t - trace.att.omega);
        const int offset_f = trace.att.omega - (t - lo_f);
        for (std::size_t j = 0; j < trace.attn_fwd[t].size(); ++j)
            dump.forward_weights.at(t, offset_f + static_cast<int>(j)) = trace.attn_fwd[t][j];
        // Backward: column j holds weight for frame t+j; right-padded at the end.
        for (std::size_t j = 0; j < trace.attn_bwd[t].size(); ++j)
            dump.backward_weights.at(t, static_cast<int>(j)) = trace.attn_bwd[t][j];
    }
    return dump;
}

namespace {

constexpr char kMagic[6] = {'B', 'I', 'A', 'T', 'T', '1'};

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64(std::string& s, double x) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t len;
    std::size_t pos = 0;
    std::string path;

    void need(std::size_t n) const {
        if (pos + n > len) throw IoError("truncated checkpoint: " + path);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(p[pos]) | (p[pos + 1] << 8) | (p[pos + 2] << 16) |
                          (static_cast<std::uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const AttentionConfig& att) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<std::uint32_t>(params.dims.feature));
    put_u32(out, static_cast<std::uint32_t>(params.dims.encoder_out));
    put_u32(out, static_cast<std::uint32_t>(params.dims.hidden));
    put_u32(out, static_cast<std::uint32_t>(params.dims.e_dim));
    put_u32(out, static_cast<std::uint32_t>(att.omega));
    put_u32(out, static_cast<std::uint32_t>(att.xi));

    for (const auto& [name, t] : params.entries()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        if (t->is_vector()) {
            put_u32(out, 1);
            put_u32(out, static_cast<std::uint32_t>(t->rows));
        } else {
            put_u32(out, 2);
            put_u32(out, static_cast<std::uint32_t>(t->rows));
            put_u32(out, static_cast<std::uint32_t>(t->cols));
        }
        for (double x : t->v) put_f64(out, x);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint write failed: " + path);
}

std::pair<ModelParams, AttentionConfig> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf.data(), buf.size(), 0, path};

    r.need(sizeof(kMagic));
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw IoError("bad checkpoint magic: " + path);
    r.pos = sizeof(kMagic);

    ModelDims dims;
    dims.feature = static_cast<int>(r.u32());
    dims.encoder_out = static_cast<int>(r.u32());
    dims.hidden = static_cast<int>(r.u32());
    dims.e_dim = static_cast<int>(r.u32());
    AttentionConfig att;
    att.omega = static_cast<int>(r.u32());
    att.xi = static_cast<int>(r.u32());
    dims.validate();
    att.validate();

    ModelParams params = init_params(dims, 0);
    for (auto& [name, t] : params.entries()) {
        const std::string got = r.str(r.u32());
        if (got != name)
            throw IoError("checkpoint tensor order mismatch: expected " + name + ", found " + got);
        const std::uint32_t ndim = r.u32();
        int rows = 0, cols = 1;
        if (ndim == 1) {
            rows = static_cast<int>(r.u32());
        } else if (ndim == 2) {
            rows = static_cast<int>(r.u32());
            cols = static_cast<int>(r.u32());
        } else {
            throw IoError("checkpoint tensor rank " + std::to_string(ndim) + " unsupported: " + path);
        }
        if (rows != t->rows || cols != t->cols)
            throw IoError("checkpoint tensor " + name + " has shape inconsistent with header dims");
        for (double& x : t->v) x = r.f64();
    }
    if (r.pos != r.len) throw IoError("trailing bytes in checkpoint: " + path);
    return {std::move(params), att};
}

}  // namespace biatt
