// McFxLMS / McFxNLMS per-sample adaptation.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mcanc/fir.hpp"
#include "mcanc/types.hpp"

namespace mcanc {

enum class Algorithm { FxLMS, FxNLMS };

inline const char* to_string(Algorithm a) { return a == Algorithm::FxLMS ? "fxlms" : "fxnlms"; }

struct StepConfig {
    double mu = 1e-5;
    Algorithm algorithm = Algorithm::FxLMS;
    double epsilon = 1e-8;  // FxNLMS regularizer

    void validate() const {
        if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("step.mu must be finite and > 0");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("step.epsilon must be finite and >= 0");
    }
};

struct StepReport {
    MultiChannelFrame error_frame;
    double cost = 0.0;
    double grad_norm = 0.0;
    /// Mean of the per-source step sizes actually applied.
    double effective_mu = 0.0;
    std::vector<double> effective_mu_per_source;
};

/// e_m = d_m - y'_m.
inline MultiChannelFrame form_error(std::span<const double> d, std::span<const double> y_prime) {
    if (d.size() != y_prime.size()) {
        throw ShapeError("form_error: disturbance has " + std::to_string(d.size()) +
                         " channels, anti-noise has " + std::to_string(y_prime.size()));
    }
    MultiChannelFrame e(d.size());
    for (std::size_t m = 0; m < d.size(); ++m) e[m] = d[m] - y_prime[m];
    return e;
}

/// Sum of squared errors over all sensors.
inline double cost(std::span<const double> e) {
    double acc = 0.0;
    for (double v : e) acc += v * v;
    return acc;
}

/// grad[k][j] = -2 sum_m e_m x'_jkm(n). Summation over m is ascending.
inline FilterGradient fxlms_gradient(const FilteredReferenceTensor& fr, std::span<const double> e) {
    const auto& d = fr.dims();
    if (e.size() != d.m_errors) {
        throw ShapeError("fxlms_gradient: error frame has " + std::to_string(e.size()) +
                         " channels, expected " + std::to_string(d.m_errors));
    }
    FilterGradient grad(d.k_sources, d.j_refs, d.n_taps);
    for (std::size_t k = 0; k < d.k_sources; ++k) {
        for (std::size_t j = 0; j < d.j_refs; ++j) {
            auto g = grad.row(k, j);
            for (std::size_t m = 0; m < d.m_errors; ++m) {
                const double scale = -2.0 * e[m];
                const auto xf = fr.buffer(j, k, m);
                for (std::size_t i = 0; i < d.n_taps; ++i) g[i] += scale * xf[i];
            }
        }
    }
    return grad;
}

/// Energy of all filtered references that feed source k.
inline double filtered_reference_energy(const FilteredReferenceTensor& fr, std::size_t k) {
    const auto& d = fr.dims();
    double acc = 0.0;
    for (std::size_t j = 0; j < d.j_refs; ++j) {
        for (std::size_t m = 0; m < d.m_errors; ++m) {
            for (double v : fr.buffer(j, k, m)) acc += v * v;
        }
    }
    return acc;
}

/// w_kj <- w_kj - (mu_k / 2) grad_kj, with mu_k = mu for FxLMS and
/// mu / (sum_{j,m} |x'_jkm|^2 + eps) for FxNLMS.
///
/// Throws NumericError without touching `w` if the gradient or any updated
/// coefficient would be non-finite.
inline StepReport apply_update(ControlFilterMatrix& w, const FilterGradient& grad, const StepConfig& cfg,
                               const FilteredReferenceTensor& fr) {
    if (grad.dim0() != w.outputs() || grad.dim1() != w.refs() || grad.dim2() != w.taps() ||
        !w.matches(fr.dims())) {
        throw ShapeError("apply_update: gradient, filter and filtered references disagree on shape");
    }
    StepReport report;
    report.grad_norm = grad.frobenius_norm();
    if (!std::isfinite(report.grad_norm)) {
        throw NumericError("apply_update: non-finite gradient (norm " + std::to_string(report.grad_norm) + ")");
    }

    report.effective_mu_per_source.assign(w.outputs(), cfg.mu);
    if (cfg.algorithm == Algorithm::FxNLMS) {
        for (std::size_t k = 0; k < w.outputs(); ++k) {
            const double energy = filtered_reference_energy(fr, k) + cfg.epsilon;
            // energy == 0 only with eps == 0 and silent references; grad_k is 0 then too.
            report.effective_mu_per_source[k] = energy > 0.0 ? cfg.mu / energy : 0.0;
        }
    }

    auto& coeffs = w.coeffs();
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < w.outputs(); ++k) {
            const double half_mu = 0.5 * report.effective_mu_per_source[k];
            for (std::size_t j = 0; j < w.refs(); ++j) {
                auto wk = coeffs.row(k, j);
                const auto gk = grad.row(k, j);
                for (std::size_t i = 0; i < wk.size(); ++i) {
                    const double next = wk[i] - half_mu * gk[i];
                    if (pass == 0) {
                        if (!std::isfinite(next)) {
                            throw NumericError("apply_update: coefficient (" + std::to_string(k) + "," +
                                               std::to_string(j) + "," + std::to_string(i) +
                                               ") would become non-finite");
                        }
                    } else {
                        wk[i] = next;
                    }
                }
            }
        }
    }

    double mu_sum = 0.0;
    for (double m : report.effective_mu_per_source) mu_sum += m;
    report.effective_mu = mu_sum / static_cast<double>(w.outputs());
    return report;
}

/// Everything one adaptation loop owns.
struct ControllerState {
    SystemDims dims;
    ControlFilterMatrix w;
    PathMatrix secondary;           // true plant s
    PathMatrix secondary_estimate;  // s_hat used for filtered references
    DelayLineBank ref_history;      // J channels, N + L - 1 lags
    DelayLineBank ctrl_history;     // K channels, L lags
    FilteredReferenceTensor filtered_refs;

    ControllerState(const SystemDims& d, PathMatrix s, PathMatrix s_hat)
        : dims(d),
          w(new_zero_filter(d)),
          secondary(std::move(s)),
          secondary_estimate(std::move(s_hat)),
          ref_history(d.j_refs, d.n_taps + d.l_sec - 1),
          ctrl_history(d.k_sources, d.l_sec),
          filtered_refs(d) {
        const auto check = [&](const PathMatrix& p, const char* name) {
            if (p.rows() != d.m_errors || p.cols() != d.k_sources || p.len() != d.l_sec) {
                throw ShapeError(std::string("ControllerState: ") + name + " must be M x K x L");
            }
        };
        check(secondary, "secondary path");
        check(secondary_estimate, "secondary path estimate");
    }
};

/// One iteration n: reference in, control out through the true plant,
/// error, filtered references through the estimate, gradient, update.
inline StepReport anc_step(ControllerState& state, std::span<const double> ref_frame,
                           std::span<const double> d_frame, const StepConfig& cfg) {
    if (ref_frame.size() != state.dims.j_refs) throw ShapeError("anc_step: reference frame must have J channels");
    if (d_frame.size() != state.dims.m_errors) throw ShapeError("anc_step: disturbance frame must have M channels");

    push_frame(state.ref_history, ref_frame);
    const auto y = compute_control_frame(state.w, state.ref_history);
    push_frame(state.ctrl_history, y);
    const auto y_prime = compute_antinoise_frame(state.secondary, state.ctrl_history);
    auto e = form_error(d_frame, y_prime);
    update_filtered_reference(state.filtered_refs, state.secondary_estimate, state.ref_history);
    const auto grad = fxlms_gradient(state.filtered_refs, e);

    auto report = apply_update(state.w, grad, cfg, state.filtered_refs);
    report.cost = cost(e);
    report.error_frame = std::move(e);
    return report;
}

}  // namespace mcanc
