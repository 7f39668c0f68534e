#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <set>

#include "mcanc/autodiff.hpp"
#include "mcanc/gradcheck.hpp"
#include "support/test_support.hpp"

using namespace mcanc;
using mcanc::ad::NodeId;
using mcanc::ad::Tape;

namespace {

/// Central-difference derivative of `root` with respect to input `id`.
double central_difference(Tape& tape, NodeId root, NodeId id, double h = 1e-6) {
    const double orig = tape.value(id);
    tape.set_input(id, orig + h);
    tape.recompute();
    const double up = tape.value(root);
    tape.set_input(id, orig - h);
    tape.recompute();
    const double down = tape.value(root);
    tape.set_input(id, orig);
    tape.recompute();
    return (up - down) / (2.0 * h);
}

/// Random graph over the full op set; returns (root, inputs).
std::pair<NodeId, std::vector<NodeId>> random_graph(Tape& tape, std::mt19937_64& rng, std::size_t target_nodes) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<NodeId> inputs, live;
    for (int i = 0; i < 16; ++i) {
        inputs.push_back(tape.input(normal(rng) * 0.5));
        live.push_back(inputs.back());
    }
    std::uniform_int_distribution<int> op(0, 4);
    while (tape.size() < target_nodes) {
        std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
        const NodeId a = live[pick(rng)];
        const NodeId b = live[pick(rng)];
        NodeId n = 0;
        switch (op(rng)) {
            case 0: n = tape.add(a, b); break;
            case 1: n = tape.mul(a, b); break;
            case 2: n = tape.square(a); break;
            case 3: {
                std::vector<NodeId> xs, ys;
                for (int i = 0; i < 3; ++i) {
                    xs.push_back(live[pick(rng)]);
                    ys.push_back(live[pick(rng)]);
                }
                n = tape.dot(xs, ys);
                break;
            }
            default: {
                const NodeId terms[] = {a, b, live[pick(rng)]};
                n = tape.sum(terms);
            }
        }
        // Keep magnitudes bounded so finite differences stay well conditioned.
        if (std::abs(tape.value(n)) < 4.0) live.push_back(n);
    }
    const std::size_t tail = std::min<std::size_t>(live.size(), 8);
    std::vector<NodeId> last(live.end() - static_cast<std::ptrdiff_t>(tail), live.end());
    return {tape.sum(last), inputs};
}

}  // namespace

TEST(Backward, SquareOfInput) {
    Tape t;
    const auto x = t.input(3.0);
    const auto root = t.square(x);
    ad::backward(t, root);
    EXPECT_EQ(t.value(root), 9.0);
    EXPECT_EQ(t.adjoint(x), 6.0);
    EXPECT_EQ(t.adjoint(root), 1.0);
}

TEST(Backward, DotProductHandChainRule) {
    Tape t;
    const NodeId a = t.input(1), b = t.input(2), c = t.input(3), d = t.input(4);
    const NodeId lhs[] = {a, b};
    const NodeId rhs[] = {c, d};
    const auto root = t.dot(lhs, rhs);
    t.backward(root);
    EXPECT_EQ(t.value(root), 11.0);
    EXPECT_EQ(t.adjoint(a), 3.0);
    EXPECT_EQ(t.adjoint(b), 4.0);
    EXPECT_EQ(t.adjoint(c), 1.0);
    EXPECT_EQ(t.adjoint(d), 2.0);
}

TEST(Backward, SharedOperandAccumulates) {
    Tape t;
    const auto x = t.input(5.0);
    const auto root = t.add(t.mul(x, x), x);  // x^2 + x
    t.backward(root);
    EXPECT_EQ(t.adjoint(x), 11.0);
}

TEST(Backward, RootOutOfRangeIsIndexError) {
    Tape t;
    t.input(1.0);
    EXPECT_THROW(t.backward(5), IndexError);
}

TEST(Tape, OperandsMustPrecedeNode) {
    Tape t;
    const auto x = t.input(1.0);
    EXPECT_THROW(t.add(x, 7), IndexError);
    EXPECT_THROW(t.set_input(t.square(x), 2.0), IndexError);
}

TEST(Tape, OperandIndicesAreTopological) {
    std::mt19937_64 rng(1);
    Tape t;
    random_graph(t, rng, 500);
    for (NodeId i = 0; i < t.size(); ++i)
        for (NodeId a : t.node(i).args) ASSERT_LT(a, i);
}

TEST(BackwardProperty, AdjointsMatchFiniteDifferences) {
    std::mt19937_64 rng(2);
    for (std::size_t size : {50u, 400u, 10000u}) {
        Tape t;
        const auto [root, inputs] = random_graph(t, rng, size);
        t.backward(root);
        for (NodeId in : inputs) {
            const double adj = t.adjoint(in);
            const double fd = central_difference(t, root, in);
            EXPECT_NEAR(adj, fd, 1e-5 * std::max(1.0, std::abs(fd))) << "graph size " << size << " input " << in;
        }
    }
}

TEST(BackwardProperty, DeterministicValuesAndAdjoints) {
    auto build = [] {
        std::mt19937_64 rng(3);
        Tape t;
        const auto [root, inputs] = random_graph(t, rng, 2000);
        t.backward(root);
        return t;
    };
    const auto a = build();
    const auto b = build();
    ASSERT_EQ(a.size(), b.size());
    for (NodeId i = 0; i < a.size(); ++i) {
        ASSERT_EQ(std::bit_cast<std::uint64_t>(a.value(i)), std::bit_cast<std::uint64_t>(b.value(i)));
        ASSERT_EQ(std::bit_cast<std::uint64_t>(a.adjoint(i)), std::bit_cast<std::uint64_t>(b.adjoint(i)));
    }
}

TEST(BuildAncGraph, ZeroFilterCostIsDisturbanceEnergy) {
    std::mt19937_64 rng(4);
    const ControlFilterMatrix w(2, 2, 3);
    ad::ReferenceHistory hist(2, fixtures::normal_vector(rng, 3 + 4 - 1));
    const PathMatrix s_hat(fixtures::normal_tensor(rng, 3, 2, 4));
    const std::vector<double> d{1.0, -2.0, 0.5};
    const auto g = ad::build_anc_graph(w, hist, s_hat, d);
    EXPECT_EQ(g.tape.value(g.root), 1.0 + 4.0 + 0.25);
}

TEST(BuildAncGraph, ScalarForward) {
    ControlFilterMatrix w(1, 1, 1);
    w.filter(0, 0)[0] = 2.0;
    const ad::ReferenceHistory hist{{3.0}};
    const PathMatrix s_hat(Tensor3(1, 1, 1, 1.0));
    const std::vector<double> d{10.0};
    auto g = ad::build_anc_graph(w, hist, s_hat, d);
    EXPECT_EQ(g.tape.value(g.root), 16.0);
    ad::backward(g.tape, g.root);
    EXPECT_EQ(ad::gradient_of_weights(g.tape, g.weights)(0, 0, 0), -24.0);
}

TEST(BuildAncGraph, RootMatchesForwardPipeline) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto inst = random_instance(rng);
        const auto closed = closed_form_gradient(inst);
        const auto g = ad::build_anc_graph(inst.w, inst.history, inst.s_hat, inst.d);
        EXPECT_NEAR(g.tape.value(g.root), closed.cost, 1e-13 * std::max(1.0, closed.cost));
    }
}

TEST(BuildAncGraph, WeightNodesAreSharedAcrossLags) {
    // One input node per coefficient regardless of L.
    ControlFilterMatrix w(2, 3, 4);
    const ad::ReferenceHistory hist(3, std::vector<double>(4 + 5 - 1, 1.0));
    const PathMatrix s_hat(Tensor3(1, 2, 5, 1.0));
    const auto g = ad::build_anc_graph(w, hist, s_hat, std::vector<double>{0.0});
    std::set<NodeId> ids(g.weights.ids.begin(), g.weights.ids.end());
    EXPECT_EQ(ids.size(), 24u);
    for (NodeId id : ids) EXPECT_EQ(g.tape.node(id).op, ad::Op::Input);
}

TEST(BuildAncGraph, ShapeErrors) {
    const ControlFilterMatrix w(1, 1, 3);
    const PathMatrix s_hat(Tensor3(1, 1, 2, 1.0));
    EXPECT_THROW(ad::build_anc_graph(w, {{1, 2, 3}}, s_hat, std::vector<double>{0.0}), ShapeError);
    EXPECT_THROW(ad::build_anc_graph(w, {{1, 2, 3, 4}}, s_hat, std::vector<double>{0.0, 1.0}), ShapeError);
    EXPECT_THROW(ad::build_anc_graph(w, {{1, 2, 3, 4}, {1, 2, 3, 4}}, s_hat, std::vector<double>{0.0}), ShapeError);
}

TEST(GradientOfWeights, ZeroErrorGivesZeroGradient) {
    std::mt19937_64 rng(6);
    auto inst = random_instance(rng);
    // Choose d equal to the anti-noise so that e = 0.
    const auto closed = closed_form_gradient(inst);
    for (std::size_t m = 0; m < inst.d.size(); ++m) inst.d[m] -= closed.error[m];
    const auto oracle = oracle_gradient(inst);
    for (double v : oracle.gradient.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(GradientOfWeights, MatchesClosedFormOnRandomInstances) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto inst = random_instance(rng);
        EXPECT_LE(relative_frobenius_error(closed_form_gradient(inst).gradient, oracle_gradient(inst).gradient), 1e-10);
    }
}

TEST(GradientOfWeights, MissingMappingIsIndexError) {
    Tape t;
    t.input(1.0);
    ad::WeightNodeMap map{1, 1, 2, {0, ad::kNoNode}};
    EXPECT_THROW(ad::gradient_of_weights(t, map), IndexError);
    ad::WeightNodeMap short_map{1, 1, 2, {0}};
    EXPECT_THROW(ad::gradient_of_weights(t, short_map), IndexError);
}
