// Tapped delay lines and the multi-channel FIR products used by the
// forward pass and by filtered-reference generation.

#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mcanc/types.hpp"

namespace mcanc {

/// Per-channel history of the most recent `depth` samples.
///
/// Each channel keeps a doubled ring (2 * depth slots) so that the window
/// [lag 0, lag depth) is always contiguous and lag-ordered, which lets FIR
/// evaluation run as a plain dot product. Unwritten history reads as 0.0.
class DelayLineBank {
public:
    DelayLineBank() = default;
    DelayLineBank(std::size_t channels, std::size_t depth)
        : channels_(channels), depth_(depth), ring_(channels * 2 * depth, 0.0) {
        if (channels < 1 || depth < 1) throw ShapeError("DelayLineBank: channels and depth must be >= 1");
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t depth() const noexcept { return depth_; }

    void push(std::span<const double> frame) {
        if (frame.size() != channels_) {
            throw ShapeError("DelayLineBank::push: frame has " + std::to_string(frame.size()) +
                             " channels, bank has " + std::to_string(channels_));
        }
        head_ = (head_ == 0 ? depth_ : head_) - 1;
        for (std::size_t c = 0; c < channels_; ++c) {
            double* base = ring_.data() + c * 2 * depth_;
            base[head_] = frame[c];
            base[head_ + depth_] = frame[c];
        }
    }

    /// Push a single value into one channel. Callers that use this must
    /// push to every channel before the next advance().
    void advance() { head_ = (head_ == 0 ? depth_ : head_) - 1; }
    void write_newest(std::size_t channel, double value) {
        double* base = ring_.data() + channel * 2 * depth_;
        base[head_] = value;
        base[head_ + depth_] = value;
    }

    /// Sample pushed `lag` steps ago; 0.0 beyond the retained depth.
    double read(std::size_t channel, std::size_t lag) const {
        if (channel >= channels_) throw ShapeError("DelayLineBank::read: channel out of range");
        if (lag >= depth_) return 0.0;
        return ring_[channel * 2 * depth_ + head_ + lag];
    }

    /// Lag-ordered window: element t is x(n - t).
    std::span<const double> history(std::size_t channel) const {
        return {ring_.data() + channel * 2 * depth_ + head_, depth_};
    }

    void clear() {
        std::fill(ring_.begin(), ring_.end(), 0.0);
        head_ = 0;
    }

private:
    std::size_t channels_ = 0;
    std::size_t depth_ = 0;
    std::size_t head_ = 0;
    std::vector<double> ring_;
};

/// Filtered references x'_jkm(n): the N most recent samples of reference j
/// filtered through the secondary-path estimate from source k to sensor m.
class FilteredReferenceTensor {
public:
    FilteredReferenceTensor() = default;
    explicit FilteredReferenceTensor(const SystemDims& dims)
        : dims_(dims), lines_(dims.j_refs * dims.k_sources * dims.m_errors, dims.n_taps) {}

    const SystemDims& dims() const noexcept { return dims_; }

    std::size_t index(std::size_t j, std::size_t k, std::size_t m) const noexcept {
        return (j * dims_.k_sources + k) * dims_.m_errors + m;
    }

    /// x'_jkm(n - i) for i = 0 .. N-1.
    std::span<const double> buffer(std::size_t j, std::size_t k, std::size_t m) const {
        return lines_.history(index(j, k, m));
    }

    DelayLineBank& lines() noexcept { return lines_; }
    const DelayLineBank& lines() const noexcept { return lines_; }

private:
    SystemDims dims_;
    DelayLineBank lines_;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace detail

inline void push_frame(DelayLineBank& bank, std::span<const double> frame) { bank.push(frame); }

/// y_k(n) = sum_j w_kj^T x_j(n), the control signal for every source.
inline MultiChannelFrame compute_control_frame(const ControlFilterMatrix& w, const DelayLineBank& refs) {
    if (refs.channels() != w.refs()) {
        throw ShapeError("compute_control_frame: filter expects " + std::to_string(w.refs()) +
                         " references, history has " + std::to_string(refs.channels()));
    }
    if (refs.depth() < w.taps()) throw ShapeError("compute_control_frame: reference history shorter than N");
    MultiChannelFrame y(w.outputs(), 0.0);
    for (std::size_t k = 0; k < w.outputs(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.refs(); ++j) {
            acc += detail::dot(w.filter(k, j), refs.history(j).first(w.taps()));
        }
        y[k] = acc;
    }
    return y;
}

/// y'_m(n) = sum_k s_mk^T y_k(n), the anti-noise at every error sensor.
inline MultiChannelFrame compute_antinoise_frame(const PathMatrix& s, const DelayLineBank& ctrl_hist) {
    if (ctrl_hist.channels() != s.cols()) {
        throw ShapeError("compute_antinoise_frame: path expects " + std::to_string(s.cols()) +
                         " sources, history has " + std::to_string(ctrl_hist.channels()));
    }
    if (ctrl_hist.depth() < s.len()) throw ShapeError("compute_antinoise_frame: control history shorter than L");
    MultiChannelFrame out(s.rows(), 0.0);
    for (std::size_t m = 0; m < s.rows(); ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s.cols(); ++k) {
            acc += detail::dot(s.response(m, k), ctrl_hist.history(k).first(s.len()));
        }
        out[m] = acc;
    }
    return out;
}

/// Appends x'_jkm(n) = sum_t s_hat_mk[t] x_j(n - t) to every (j,k,m) buffer.
///
/// The buffer then holds the N-vector that equals the N x L window matrix
/// [x_j(n) ... x_j(n-L+1)] (row i = lags i .. i+L-1) times s_hat_mk.
inline void update_filtered_reference(FilteredReferenceTensor& fr, const PathMatrix& s_hat,
                                      const DelayLineBank& refs) {
    const auto& d = fr.dims();
    if (s_hat.rows() != d.m_errors || s_hat.cols() != d.k_sources) {
        throw ShapeError("update_filtered_reference: path estimate must be M x K");
    }
    if (refs.channels() != d.j_refs) throw ShapeError("update_filtered_reference: history must have J channels");
    if (refs.depth() < s_hat.len()) throw ShapeError("update_filtered_reference: history shorter than L");
    auto& lines = fr.lines();
    lines.advance();
    for (std::size_t j = 0; j < d.j_refs; ++j) {
        const auto x = refs.history(j).first(s_hat.len());
        for (std::size_t k = 0; k < d.k_sources; ++k) {
            for (std::size_t m = 0; m < d.m_errors; ++m) {
                lines.write_newest(fr.index(j, k, m), detail::dot(s_hat.response(m, k), x));
            }
        }
    }
}

}  // namespace mcanc
