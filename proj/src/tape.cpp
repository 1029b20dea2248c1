#include "biatt/tape.hpp"

#include <algorithm>
#include <cmath>

#include "biatt/kernels.hpp"

namespace biatt::nn {

namespace detail {
#ifdef BIATT_CORRUPT_GRADIENTS
bool corrupt_gradients = true;
#else
bool corrupt_gradients = false;
#endif
}  // namespace detail

bool Tape::any_grad(std::span<const NodeId> ids) const {
    return std::any_of(ids.begin(), ids.end(), [&](NodeId i) { return nodes_[i].needs_grad; });
}

NodeId Tape::leaf(const Tensor& t) {
    if (!t.all_finite()) throw InvalidInput("leaf: non-finite values");
    Node n{Op::Leaf, true, {}, t, Tensor(t.rows, t.cols), {}};
    return push(std::move(n));
}

NodeId Tape::constant(const Tensor& t) {
    if (!t.all_finite()) throw InvalidInput("constant: non-finite values");
    Node n{Op::Constant, false, {}, t, Tensor(), {}};
    return push(std::move(n));
}

NodeId Tape::matvec(NodeId w, NodeId x) {
    const Tensor& W = val(w);
    const Tensor& X = val(x);
    if (!X.is_vector() || W.cols != X.rows)
        throw InvalidInput("matvec: dimension mismatch");
    Node n{Op::MatVec, any_grad({{w, x}}), {w, x}, Tensor::vec(W.rows), Tensor(), {}};
    kernels::matvec(W, X.v.data(), n.value.v.data());
    if (n.needs_grad) n.grad = Tensor::vec(W.rows);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows != B.rows || A.cols != B.cols) throw InvalidInput("add: shape mismatch");
    Node n{Op::Add, any_grad({{a, b}}), {a, b}, Tensor(A.rows, A.cols), Tensor(), {}};
    for (int i = 0; i < A.size(); ++i) n.value[i] = A[i] + B[i];
    if (n.needs_grad) n.grad = Tensor(A.rows, A.cols);
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows != B.rows || A.cols != B.cols) throw InvalidInput("sub: shape mismatch");
    Node n{Op::Sub, any_grad({{a, b}}), {a, b}, Tensor(A.rows, A.cols), Tensor(), {}};
    for (int i = 0; i < A.size(); ++i) n.value[i] = A[i] - B[i];
    if (n.needs_grad) n.grad = Tensor(A.rows, A.cols);
    return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows != B.rows || A.cols != B.cols) throw InvalidInput("hadamard: shape mismatch");
    Node n{Op::Hadamard, any_grad({{a, b}}), {a, b}, Tensor(A.rows, A.cols), Tensor(), {}};
    for (int i = 0; i < A.size(); ++i) n.value[i] = A[i] * B[i];
    if (n.needs_grad) n.grad = Tensor(A.rows, A.cols);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double factor) {
    const Tensor& X = val(x);
    Node n{Op::Scale, any_grad({{x}}), {x}, Tensor(X.rows, X.cols), Tensor(), {factor}};
    for (int i = 0; i < X.size(); ++i) n.value[i] = factor * X[i];
    if (n.needs_grad) n.grad = Tensor(X.rows, X.cols);
    return push(std::move(n));
}

NodeId Tape::sigmoid(NodeId x) {
    const Tensor& X = val(x);
    Node n{Op::Sigmoid, any_grad({{x}}), {x}, Tensor(X.rows, X.cols), Tensor(), {}};
    for (int i = 0; i < X.size(); ++i) n.value[i] = 1.0 / (1.0 + std::exp(-X[i]));
    if (n.needs_grad) n.grad = Tensor(X.rows, X.cols);
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId x) {
    const Tensor& X = val(x);
    Node n{Op::Tanh, any_grad({{x}}), {x}, Tensor(X.rows, X.cols), Tensor(), {}};
    for (int i = 0; i < X.size(); ++i) n.value[i] = std::tanh(X[i]);
    if (n.needs_grad) n.grad = Tensor(X.rows, X.cols);
    return push(std::move(n));
}

NodeId Tape::softmax(NodeId x) {
    const Tensor& X = val(x);
    if (X.size() == 0) throw InvalidInput("softmax: empty input");
    for (int i = 0; i < X.size(); ++i)
        if (std::isnan(X[i])) throw InvalidInput("softmax: NaN input");
    Node n{Op::Softmax, any_grad({{x}}), {x}, Tensor(X.rows, X.cols), Tensor(), {}};
    const double m = *std::max_element(X.v.begin(), X.v.end());
    double sum = 0.0;
    for (int i = 0; i < X.size(); ++i) {
        n.value[i] = std::exp(X[i] - m);
        sum += n.value[i];
    }
    for (int i = 0; i < X.size(); ++i) n.value[i] /= sum;
    if (n.needs_grad) n.grad = Tensor(X.rows, X.cols);
    return push(std::move(n));
}

NodeId Tape::concat(std::span<const NodeId> parts) {
    if (parts.empty()) throw InvalidInput("concat: no inputs");
    int total = 0;
    for (NodeId p : parts) {
        if (!val(p).is_vector()) throw InvalidInput("concat: vector inputs required");
        total += val(p).rows;
    }
    Node n{Op::Concat, any_grad(parts), {parts.begin(), parts.end()}, Tensor::vec(total), Tensor(), {}};
    int off = 0;
    for (NodeId p : parts) {
        const Tensor& t = val(p);
        std::copy(t.v.begin(), t.v.end(), n.value.v.begin() + off);
        off += t.rows;
    }
    if (n.needs_grad) n.grad = Tensor::vec(total);
    return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.is_vector() || !B.is_vector() || A.rows != B.rows) throw InvalidInput("dot: shape mismatch");
    Node n{Op::Dot, any_grad({{a, b}}), {a, b}, Tensor::vec(1), Tensor(), {}};
    double acc = 0.0;
    for (int i = 0; i < A.rows; ++i) acc += A[i] * B[i];
    n.value[0] = acc;
    if (n.needs_grad) n.grad = Tensor::vec(1);
    return push(std::move(n));
}

NodeId Tape::attend(NodeId weights, std::span<const NodeId> keys) {
    const Tensor& W = val(weights);
    if (!W.is_vector() || W.rows != static_cast<int>(keys.size()))
        throw InvalidInput("attend: weight/key count mismatch");
    const int dim = val(keys[0]).rows;
    std::vector<NodeId> in;
    in.reserve(keys.size() + 1);
    in.push_back(weights);
    for (NodeId k : keys) {
        if (val(k).rows != dim || !val(k).is_vector()) throw InvalidInput("attend: key shape mismatch");
        in.push_back(k);
    }
    Node n{Op::Attend, any_grad(in), std::move(in), Tensor::vec(dim), Tensor(), {}};
    for (std::size_t j = 0; j < keys.size(); ++j) {
        const Tensor& K = val(keys[j]);
        const double w = W[static_cast<int>(j)];
        for (int i = 0; i < dim; ++i) n.value[i] += w * K[i];
    }
    if (n.needs_grad) n.grad = Tensor::vec(dim);
    return push(std::move(n));
}

NodeId Tape::sum_squares(NodeId x) {
    const Tensor& X = val(x);
    Node n{Op::SumSq, any_grad({{x}}), {x}, Tensor::vec(1), Tensor(), {}};
    double acc = 0.0;
    for (int i = 0; i < X.size(); ++i) acc += X[i] * X[i];
    n.value[0] = acc;
    if (n.needs_grad) n.grad = Tensor::vec(1);
    return push(std::move(n));
}

NodeId Tape::sum_scalars(std::span<const NodeId> parts) {
    if (parts.empty()) throw InvalidInput("sum_scalars: no inputs");
    for (NodeId p : parts)
        if (!val(p).is_scalar()) throw InvalidInput("sum_scalars: scalar inputs required");
    Node n{Op::SumScalars, any_grad(parts), {parts.begin(), parts.end()}, Tensor::vec(1), Tensor(), {}};
    double acc = 0.0;
    for (NodeId p : parts) acc += val(p)[0];
    n.value[0] = acc;
    if (n.needs_grad) n.grad = Tensor::vec(1);
    return push(std::move(n));
}

NodeId Tape::dropout(NodeId x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw InvalidConfig("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;  // inference is a no-op
    const Tensor& X = val(x);
    Node n{Op::Dropout, any_grad({{x}}), {x}, Tensor(X.rows, X.cols), Tensor(), {}};
    n.aux.resize(static_cast<std::size_t>(X.size()));
    const double keep_scale = 1.0 / (1.0 - rate);
    for (int i = 0; i < X.size(); ++i) {
        n.aux[i] = (rng.uniform() < rate) ? 0.0 : keep_scale;
        n.value[i] = n.aux[i] * X[i];
    }
    if (n.needs_grad) n.grad = Tensor(X.rows, X.cols);
    return push(std::move(n));
}

void Tape::backward(NodeId loss) {
    if (!val(loss).is_scalar()) throw InvalidInput("backward: loss must be a scalar node");

    for (Node& n : nodes_)
        if (n.needs_grad) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
    if (!nodes_[loss].needs_grad) return;  // loss independent of all leaves
    nodes_[loss].grad[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.op == Op::Leaf || n.op == Op::Constant) continue;
        const Tensor& g = n.grad;

        auto sink = [&](NodeId in) -> Tensor* {
            return nodes_[in].needs_grad ? &nodes_[in].grad : nullptr;
        };

        switch (n.op) {
            case Op::MatVec: {
                const Tensor& W = nodes_[n.in[0]].value;
                const Tensor& X = nodes_[n.in[1]].value;
                if (Tensor* gw = sink(n.in[0])) kernels::outer_accumulate(*gw, g.v.data(), X.v.data());
                if (Tensor* gx = sink(n.in[1])) {
                    std::vector<double> tmp(static_cast<std::size_t>(W.cols));
                    kernels::matvec_transposed(W, g.v.data(), tmp.data());
                    for (int i = 0; i < W.cols; ++i) gx->v[i] += tmp[i];
                }
                break;
            }
            case Op::Add: {
                for (int s = 0; s < 2; ++s)
                    if (Tensor* gi = sink(n.in[s]))
                        for (int i = 0; i < g.size(); ++i) gi->v[i] += g[i];
                break;
            }
            case Op::Sub: {
                if (Tensor* ga = sink(n.in[0]))
                    for (int i = 0; i < g.size(); ++i) ga->v[i] += g[i];
                if (Tensor* gb = sink(n.in[1]))
                    for (int i = 0; i < g.size(); ++i) gb->v[i] -= g[i];
                break;
            }
            case Op::Hadamard: {
                const Tensor& A = nodes_[n.in[0]].value;
                const Tensor& B = nodes_[n.in[1]].value;
                if (Tensor* ga = sink(n.in[0]))
                    for (int i = 0; i < g.size(); ++i) ga->v[i] += g[i] * B[i];
                if (Tensor* gb = sink(n.in[1]))
                    for (int i = 0; i < g.size(); ++i) gb->v[i] += g[i] * A[i];
                break;
            }
            case Op::Scale: {
                if (Tensor* gx = sink(n.in[0]))
                    for (int i = 0; i < g.size(); ++i) gx->v[i] += n.aux[0] * g[i];
                break;
            }
            case Op::Sigmoid: {
                if (Tensor* gx = sink(n.in[0])) {
                    const double fault = detail::corrupt_gradients ? 1.01 : 1.0;
                    for (int i = 0; i < g.size(); ++i)
                        gx->v[i] += fault * g[i] * n.value[i] * (1.0 - n.value[i]);
                }
                break;
            }
            case Op::Tanh: {
                if (Tensor* gx = sink(n.in[0]))
                    for (int i = 0; i < g.size(); ++i) gx->v[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                break;
            }
            case Op::Softmax: {
                if (Tensor* gx = sink(n.in[0])) {
                    double gy = 0.0;
                    for (int i = 0; i < g.size(); ++i) gy += g[i] * n.value[i];
                    for (int i = 0; i < g.size(); ++i) gx->v[i] += n.value[i] * (g[i] - gy);
                }
                break;
            }
            case Op::Concat: {
                int off = 0;
                for (NodeId in : n.in) {
                    const int len = nodes_[in].value.rows;
                    if (Tensor* gi = sink(in))
                        for (int i = 0; i < len; ++i) gi->v[i] += g[off + i];
                    off += len;
                }
                break;
            }
            case Op::Dot: {
                const Tensor& A = nodes_[n.in[0]].value;
                const Tensor& B = nodes_[n.in[1]].value;
                const double gs = g[0];
                if (Tensor* ga = sink(n.in[0]))
                    for (int i = 0; i < A.rows; ++i) ga->v[i] += gs * B[i];
                if (Tensor* gb = sink(n.in[1]))
                    for (int i = 0; i < B.rows; ++i) gb->v[i] += gs * A[i];
                break;
            }
            case Op::Attend: {
                const Tensor& W = nodes_[n.in[0]].value;
                Tensor* gw = sink(n.in[0]);
                for (std::size_t j = 1; j < n.in.size(); ++j) {
                    const Tensor& K = nodes_[n.in[j]].value;
                    if (gw) {
                        double acc = 0.0;
                        for (int i = 0; i < g.size(); ++i) acc += g[i] * K[i];
                        gw->v[j - 1] += acc;
                    }
                    if (Tensor* gk = sink(n.in[j])) {
                        const double w = W[static_cast<int>(j - 1)];
                        for (int i = 0; i < g.size(); ++i) gk->v[i] += w * g[i];
                    }
                }
                break;
            }
            case Op::SumSq: {
                if (Tensor* gx = sink(n.in[0])) {
                    const Tensor& X = nodes_[n.in[0]].value;
                    const double gs = g[0];
                    for (int i = 0; i < X.size(); ++i) gx->v[i] += 2.0 * gs * X[i];
                }
                break;
            }
            case Op::SumScalars: {
                for (NodeId in : n.in)
                    if (Tensor* gi = sink(in)) gi->v[0] += g[0];
                break;
            }
            case Op::Dropout: {
                if (Tensor* gx = sink(n.in[0]))
                    for (int i = 0; i < g.size(); ++i) gx->v[i] += n.aux[i] * g[i];
                break;
            }
            case Op::Leaf:
            case Op::Constant:
                break;
        }
    }
}

NodeId dense(Tape& tape, NodeId x, NodeId w, NodeId b, Activation act) {
    NodeId pre = tape.add(tape.matvec(w, x), b);
    switch (act) {
        case Activation::None: return pre;
        case Activation::Tanh: return tape.tanh(pre);
        case Activation::Sigmoid: return tape.sigmoid(pre);
    }
    return pre;
}

NodeId bilinear_score(Tape& tape, NodeId key, NodeId w, NodeId query) {
    return tape.dot(key, tape.matvec(w, query));
}

LstmState lstm_step(Tape& tape, const LstmNodeIds& p, NodeId x, const LstmState& prev) {
    auto gate = [&](NodeId W, NodeId U, NodeId b) {
        return tape.add(tape.add(tape.matvec(W, x), tape.matvec(U, prev.h)), b);
    };
    const NodeId i = tape.sigmoid(gate(p.Wi, p.Ui, p.bi));
    const NodeId f = tape.sigmoid(gate(p.Wf, p.Uf, p.bf));
    const NodeId o = tape.sigmoid(gate(p.Wo, p.Uo, p.bo));
    const NodeId g = tape.tanh(gate(p.Wg, p.Ug, p.bg));
    const NodeId c = tape.add(tape.hadamard(f, prev.c), tape.hadamard(i, g));
    const NodeId h = tape.hadamard(o, tape.tanh(c));
    return {h, c};
}

std::vector<NodeId> run_lstm(Tape& tape, const LstmNodeIds& p, std::span<const NodeId> seq,
                             int hidden, Direction dir) {
    if (seq.empty()) throw InvalidInput("run_lstm: empty sequence");
    LstmState state{tape.constant(Tensor::vec(hidden)), tape.constant(Tensor::vec(hidden))};
    std::vector<NodeId> out(seq.size());
    if (dir == Direction::Forward) {
        for (std::size_t t = 0; t < seq.size(); ++t) {
            state = lstm_step(tape, p, seq[t], state);
            out[t] = state.h;
        }
    } else {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const std::size_t t = seq.size() - 1 - i;
            state = lstm_step(tape, p, seq[t], state);
            out[t] = state.h;
        }
    }
    return out;
}

}  // namespace biatt::nn
