// Random small ANC instances and the two independent routes to dJ/dW:
// the closed-form filtered-x gradient and the reverse-mode tape.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "mcanc/adaptive.hpp"
#include "mcanc/autodiff.hpp"
#include "mcanc/fir.hpp"

namespace mcanc {

struct GradInstance {
    SystemDims dims;
    ControlFilterMatrix w;
    ad::ReferenceHistory history;  // history[j][t] = x_j(n - t), t < N + L - 1
    PathMatrix s_hat;
    MultiChannelFrame d;
};

struct InstanceLimits {
    std::size_t max_channels = 3;
    std::size_t max_taps = 8;
    std::size_t max_sec = 6;
};

inline GradInstance random_instance(std::mt19937_64& rng, const InstanceLimits& lim = {}) {
    std::uniform_int_distribution<std::size_t> ch(1, lim.max_channels);
    std::uniform_int_distribution<std::size_t> taps(1, lim.max_taps);
    std::uniform_int_distribution<std::size_t> sec(1, lim.max_sec);
    std::normal_distribution<double> normal(0.0, 1.0);

    GradInstance inst;
    auto& d = inst.dims;
    d.j_refs = ch(rng);
    d.k_sources = ch(rng);
    d.m_errors = ch(rng);
    d.n_taps = taps(rng);
    d.l_sec = sec(rng);

    inst.w = new_zero_filter(d);
    for (double& v : inst.w.coeffs().values()) v = normal(rng);
    inst.history.assign(d.j_refs, std::vector<double>(d.n_taps + d.l_sec - 1));
    for (auto& h : inst.history)
        for (double& v : h) v = normal(rng);
    Tensor3 s(d.m_errors, d.k_sources, d.l_sec);
    for (double& v : s.values()) v = normal(rng);
    inst.s_hat = PathMatrix(std::move(s));
    inst.d.resize(d.m_errors);
    for (double& v : inst.d) v = normal(rng);
    return inst;
}

struct PipelineResult {
    MultiChannelFrame error;
    double cost = 0.0;
    FilterGradient gradient;
};

/// Replays the history through the sample-by-sample engine with W held
/// fixed and s_hat as the plant, then forms e(n), J and the closed-form
/// filtered-x gradient.
inline PipelineResult closed_form_gradient(const GradInstance& inst, const ControlFilterMatrix& w) {
    const auto& d = inst.dims;
    const std::size_t depth = d.n_taps + d.l_sec - 1;
    DelayLineBank refs(d.j_refs, depth);
    DelayLineBank ctrl(d.k_sources, d.l_sec);
    FilteredReferenceTensor fr(d);
    MultiChannelFrame frame(d.j_refs);
    for (std::size_t lag = depth; lag-- > 0;) {
        for (std::size_t j = 0; j < d.j_refs; ++j) frame[j] = inst.history[j][lag];
        refs.push(frame);
        ctrl.push(compute_control_frame(w, refs));
        update_filtered_reference(fr, inst.s_hat, refs);
    }
    PipelineResult r;
    r.error = form_error(inst.d, compute_antinoise_frame(inst.s_hat, ctrl));
    r.cost = cost(r.error);
    r.gradient = fxlms_gradient(fr, r.error);
    return r;
}

inline PipelineResult closed_form_gradient(const GradInstance& inst) { return closed_form_gradient(inst, inst.w); }

struct OracleResult {
    double cost = 0.0;
    FilterGradient gradient;
    std::size_t nodes = 0;
};

inline OracleResult oracle_gradient(const GradInstance& inst) {
    auto g = ad::build_anc_graph(inst.w, inst.history, inst.s_hat, inst.d);
    ad::backward(g.tape, g.root);
    return {g.tape.value(g.root), ad::gradient_of_weights(g.tape, g.weights), g.tape.size()};
}

/// Central differences of the pipeline cost with respect to every tap.
inline FilterGradient finite_difference_gradient(const GradInstance& inst, double h = 1e-6) {
    FilterGradient grad(inst.w.outputs(), inst.w.refs(), inst.w.taps());
    auto w = inst.w;
    auto coeffs = w.coeffs().values();
    auto out = grad.values();
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const double orig = coeffs[i];
        coeffs[i] = orig + h;
        const double up = closed_form_gradient(inst, w).cost;
        coeffs[i] = orig - h;
        const double down = closed_form_gradient(inst, w).cost;
        coeffs[i] = orig;
        out[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// ||a - b||_F / ||b||_F; 0 when both vanish.
inline double relative_frobenius_error(const Tensor3& a, const Tensor3& b) {
    if (!a.same_shape(b)) throw ShapeError("relative_frobenius_error: shapes differ");
    double diff = 0.0, ref = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        diff += (av[i] - bv[i]) * (av[i] - bv[i]);
        ref += bv[i] * bv[i];
    }
    if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(diff / ref);
}

struct GradcheckSummary {
    std::size_t instances = 0;
    double max_oracle_error = 0.0;
    double max_fd_error = 0.0;
    double max_cost_mismatch = 0.0;  // |J_tape - J_pipeline| / max(1, J)
    double elapsed_s = 0.0;
};

inline GradcheckSummary run_gradcheck(std::size_t instances, std::uint64_t seed, bool finite_differences = true,
                                      const InstanceLimits& lim = {}) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    GradcheckSummary s;
    s.instances = instances;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto inst = random_instance(rng, lim);
        const auto closed = closed_form_gradient(inst);
        const auto oracle = oracle_gradient(inst);
        s.max_oracle_error = std::max(s.max_oracle_error, relative_frobenius_error(closed.gradient, oracle.gradient));
        s.max_cost_mismatch =
            std::max(s.max_cost_mismatch, std::abs(oracle.cost - closed.cost) / std::max(1.0, closed.cost));
        if (finite_differences) {
            s.max_fd_error = std::max(s.max_fd_error,
                                      relative_frobenius_error(closed.gradient, finite_difference_gradient(inst)));
        }
    }
    s.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

}  // namespace mcanc
