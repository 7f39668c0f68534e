// Minimal reverse-mode differentiation tape.
//
// Only the primitives needed to express the ANC cost graph are provided.
// It is a test instrument for the closed-form gradient, not a framework.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcanc/types.hpp"

namespace mcanc::ad {

enum class Op : std::uint8_t { Input, Add, Mul, Dot, Square, Sum };

using NodeId = std::size_t;

struct Node {
    Op op = Op::Input;
    /// Dot stores both operand vectors back to back: a0..a{n-1}, b0..b{n-1}.
    std::vector<NodeId> args;
    double value = 0.0;
    double adjoint = 0.0;
};

class Tape {
public:
    NodeId input(double v) { return append(Op::Input, {}, v); }

    NodeId add(NodeId a, NodeId b) { return append(Op::Add, {a, b}, 0.0); }
    NodeId mul(NodeId a, NodeId b) { return append(Op::Mul, {a, b}, 0.0); }
    NodeId square(NodeId a) { return append(Op::Square, {a}, 0.0); }

    NodeId dot(std::span<const NodeId> a, std::span<const NodeId> b) {
        if (a.size() != b.size()) throw ShapeError("ad::Tape::dot: operand lengths differ");
        std::vector<NodeId> args(a.begin(), a.end());
        args.insert(args.end(), b.begin(), b.end());
        return append(Op::Dot, std::move(args), 0.0);
    }

    NodeId sum(std::span<const NodeId> terms) {
        return append(Op::Sum, std::vector<NodeId>(terms.begin(), terms.end()), 0.0);
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    double value(NodeId id) const { return nodes_.at(id).value; }
    double adjoint(NodeId id) const { return nodes_.at(id).adjoint; }

    /// Overwrite an input value; call recompute() afterwards.
    void set_input(NodeId id, double v) {
        auto& n = nodes_.at(id);
        if (n.op != Op::Input) throw IndexError("ad::Tape::set_input: node " + std::to_string(id) + " is not an input");
        n.value = v;
    }

    /// Re-evaluate every non-input node in tape order.
    void recompute() {
        for (auto& n : nodes_) {
            if (n.op != Op::Input) n.value = evaluate(n);
        }
    }

    /// Reverse accumulation from `root`; adjoints of nodes not upstream of
    /// `root` end at 0.
    void backward(NodeId root) {
        if (root >= nodes_.size()) {
            throw IndexError("ad::Tape::backward: root " + std::to_string(root) + " out of range");
        }
        for (auto& n : nodes_) n.adjoint = 0.0;
        nodes_[root].adjoint = 1.0;
        for (std::size_t idx = root + 1; idx-- > 0;) {
            const Node& n = nodes_[idx];
            const double g = n.adjoint;
            if (g == 0.0) continue;
            switch (n.op) {
                case Op::Input:
                    break;
                case Op::Add:
                    nodes_[n.args[0]].adjoint += g;
                    nodes_[n.args[1]].adjoint += g;
                    break;
                case Op::Mul: {
                    const double a = nodes_[n.args[0]].value;
                    const double b = nodes_[n.args[1]].value;
                    nodes_[n.args[0]].adjoint += g * b;
                    nodes_[n.args[1]].adjoint += g * a;
                    break;
                }
                case Op::Dot: {
                    const std::size_t half = n.args.size() / 2;
                    for (std::size_t i = 0; i < half; ++i) {
                        const NodeId a = n.args[i];
                        const NodeId b = n.args[half + i];
                        const double av = nodes_[a].value;
                        const double bv = nodes_[b].value;
                        nodes_[a].adjoint += g * bv;
                        nodes_[b].adjoint += g * av;
                    }
                    break;
                }
                case Op::Square:
                    nodes_[n.args[0]].adjoint += g * 2.0 * nodes_[n.args[0]].value;
                    break;
                case Op::Sum:
                    for (NodeId a : n.args) nodes_[a].adjoint += g;
                    break;
            }
        }
    }

private:
    NodeId append(Op op, std::vector<NodeId> args, double v) {
        const NodeId id = nodes_.size();
        for (NodeId a : args) {
            if (a >= id) throw IndexError("ad::Tape: operand " + std::to_string(a) + " does not precede node");
        }
        Node n{op, std::move(args), v, 0.0};
        if (op != Op::Input) n.value = evaluate(n);
        nodes_.push_back(std::move(n));
        return id;
    }

    double evaluate(const Node& n) const {
        switch (n.op) {
            case Op::Input:
                return n.value;
            case Op::Add:
                return nodes_[n.args[0]].value + nodes_[n.args[1]].value;
            case Op::Mul:
                return nodes_[n.args[0]].value * nodes_[n.args[1]].value;
            case Op::Dot: {
                const std::size_t half = n.args.size() / 2;
                double acc = 0.0;
                for (std::size_t i = 0; i < half; ++i) {
                    acc += nodes_[n.args[i]].value * nodes_[n.args[half + i]].value;
                }
                return acc;
            }
            case Op::Square: {
                const double a = nodes_[n.args[0]].value;
                return a * a;
            }
            case Op::Sum: {
                double acc = 0.0;
                for (NodeId a : n.args) acc += nodes_[a].value;
                return acc;
            }
        }
        return 0.0;
    }

    std::vector<Node> nodes_;
};

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Tape node of every w^(i)_kj, laid out K x J x N.
struct WeightNodeMap {
    std::size_t outputs = 0, refs = 0, taps = 0;
    std::vector<NodeId> ids;

    NodeId at(std::size_t k, std::size_t j, std::size_t i) const {
        if (k >= outputs || j >= refs || i >= taps) throw IndexError("WeightNodeMap: index out of range");
        return ids[(k * refs + j) * taps + i];
    }
};

struct AncGraph {
    Tape tape;
    NodeId root = kNoNode;
    WeightNodeMap weights;
};

/// Lag-ordered reference history: history[j][t] = x_j(n - t).
using ReferenceHistory = std::vector<std::vector<double>>;

/// Cost graph under the slow-adaptation assumption: one weight node per
/// coefficient, shared by every lag t of y_k(n - t). Reference samples
/// older than the supplied history are treated as zero.
///
///   y_k(n-t) = sum_j w_kj^T x_j(n-t)        t = 0 .. L-1
///   y'_m     = sum_k s_hat_mk^T y_k
///   J        = sum_m (d_m - y'_m)^2
inline AncGraph build_anc_graph(const ControlFilterMatrix& w, const ReferenceHistory& ref_hist,
                                const PathMatrix& s_hat, std::span<const double> d) {
    const std::size_t K = w.outputs(), J = w.refs(), N = w.taps();
    const std::size_t M = s_hat.rows(), L = s_hat.len();
    if (s_hat.cols() != K) throw ShapeError("build_anc_graph: path estimate must have K columns");
    if (d.size() != M) throw ShapeError("build_anc_graph: disturbance must have M channels");
    if (ref_hist.size() != J) throw ShapeError("build_anc_graph: history must have J channels");
    for (const auto& h : ref_hist) {
        if (h.size() < N + L - 1) throw ShapeError("build_anc_graph: history shorter than N + L - 1");
    }

    AncGraph g;
    auto& tape = g.tape;
    g.weights = {K, J, N, std::vector<NodeId>(K * J * N)};
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t i = 0; i < N; ++i)
                g.weights.ids[(k * J + j) * N + i] = tape.input(w.filter(k, j)[i]);

    std::vector<std::vector<NodeId>> x(J);
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t t = 0; t < N + L - 1; ++t) x[j].push_back(tape.input(ref_hist[j][t]));

    // y[k][t] = y_k(n - t)
    std::vector<std::vector<NodeId>> y(K, std::vector<NodeId>(L));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < L; ++t) {
            std::vector<NodeId> wk, xs;
            for (std::size_t j = 0; j < J; ++j) {
                for (std::size_t i = 0; i < N; ++i) {
                    wk.push_back(g.weights.ids[(k * J + j) * N + i]);
                    xs.push_back(x[j][t + i]);
                }
            }
            y[k][t] = tape.dot(wk, xs);
        }
    }

    const NodeId minus_one = tape.input(-1.0);
    std::vector<NodeId> squares;
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<NodeId> taps, ys;
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t t = 0; t < L; ++t) {
                taps.push_back(tape.input(s_hat.response(m, k)[t]));
                ys.push_back(y[k][t]);
            }
        }
        const NodeId anti = tape.dot(taps, ys);
        const NodeId dm = tape.input(d[m]);
        const NodeId err = tape.add(dm, tape.mul(minus_one, anti));
        squares.push_back(tape.square(err));
    }
    g.root = tape.sum(squares);
    return g;
}

inline void backward(Tape& tape, NodeId root) { tape.backward(root); }

/// Gathers dJ/dw into K x J x N. Requires backward() to have run.
inline FilterGradient gradient_of_weights(const Tape& tape, const WeightNodeMap& map) {
    if (map.ids.size() != map.outputs * map.refs * map.taps) {
        throw IndexError("gradient_of_weights: map size does not match its shape");
    }
    FilterGradient grad(map.outputs, map.refs, map.taps);
    auto out = grad.values();
    for (std::size_t i = 0; i < map.ids.size(); ++i) {
        if (map.ids[i] == kNoNode || map.ids[i] >= tape.size()) {
            throw IndexError("gradient_of_weights: missing node for weight " + std::to_string(i));
        }
        out[i] = tape.adjoint(map.ids[i]);
    }
    return grad;
}

}  // namespace mcanc::ad
