#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biatt/common.hpp"
#include "biatt/types.hpp"

namespace biatt::nn {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
    Leaf,      // trainable parameter
    Constant,  // input data, no gradient
    MatVec,
    Add,
    Sub,
    Hadamard,
    Scale,
    Sigmoid,
    Tanh,
    Softmax,
    Concat,
    Dot,
    Attend,  // weighted sum of key vectors by a weight vector
    SumSq,
    SumScalars,
    Dropout,
};

// Reverse-mode tape. Nodes are tensor-valued; construction order is the
// topological order, so the backward pass is a single reverse sweep. A tape is
// single-threaded; run concurrent forward passes on separate tapes.
class Tape {
public:
    struct Node {
        Op op;
        bool needs_grad;
        std::vector<NodeId> in;
        Tensor value;
        Tensor grad;
        std::vector<double> aux;  // dropout keep-mask; scale factor
    };

    Tape() { nodes_.reserve(1024); }

    NodeId leaf(const Tensor& t);
    NodeId constant(const Tensor& t);

    NodeId matvec(NodeId w, NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId scale(NodeId x, double factor);
    NodeId sigmoid(NodeId x);
    NodeId tanh(NodeId x);
    NodeId softmax(NodeId x);
    NodeId concat(std::span<const NodeId> parts);
    NodeId dot(NodeId a, NodeId b);
    NodeId attend(NodeId weights, std::span<const NodeId> keys);
    NodeId sum_squares(NodeId x);
    NodeId sum_scalars(std::span<const NodeId> parts);
    NodeId dropout(NodeId x, double rate, Rng& rng, bool training);

    // Reverse accumulation from a scalar loss node. Gradients of all previous
    // backward() calls are cleared first.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }
    const Tensor& val(NodeId id) const { return nodes_[id].value; }
    bool any_grad(std::span<const NodeId> ids) const;
};

namespace detail {
// Set by the BIATT_CORRUPT_GRADIENTS build option (and by the negative test) to
// verify that the gradient self-check actually fails on a broken backward pass.
extern bool corrupt_gradients;
}  // namespace detail

enum class Activation { None, Tanh, Sigmoid };

// activation(W x + b)
NodeId dense(Tape& tape, NodeId x, NodeId w, NodeId b, Activation act);

// key^T W query
NodeId bilinear_score(Tape& tape, NodeId key, NodeId w, NodeId query);

struct LstmNodeIds {
    NodeId Wi, Wf, Wo, Wg;
    NodeId Ui, Uf, Uo, Ug;
    NodeId bi, bf, bo, bg;
};

struct LstmState {
    NodeId h;
    NodeId c;
};

// Standard LSTM cell: i,f,o = sigmoid(...), g = tanh(...),
// c = f.c_prev + i.g, h = o.tanh(c).
LstmState lstm_step(Tape& tape, const LstmNodeIds& p, NodeId x, const LstmState& prev);

enum class Direction { Forward, Backward };

// Scan from a zero state. Backward direction reverses the input, scans, and
// reverses the output so position t still corresponds to frame t.
std::vector<NodeId> run_lstm(Tape& tape, const LstmNodeIds& p, std::span<const NodeId> seq,
                             int hidden, Direction dir);

}  // namespace biatt::nn
