// Shared tensor-shaped domain types for multi-channel ANC simulation.
//
// Every tensor is stored as 64-bit floats in row-major order with the
// outermost index first (output channel for filters, error sensor for
// paths). The layout is part of the coefficient file format.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcanc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MCANC_DEFINE_ERROR(Name)                   \
    class Name : public Error {                    \
    public:                                        \
        using Error::Error;                        \
    }

MCANC_DEFINE_ERROR(ShapeError);
MCANC_DEFINE_ERROR(SizeError);
MCANC_DEFINE_ERROR(FormatError);
MCANC_DEFINE_ERROR(NumericError);
MCANC_DEFINE_ERROR(SpecError);
MCANC_DEFINE_ERROR(IndexError);
MCANC_DEFINE_ERROR(IoError);
MCANC_DEFINE_ERROR(ConfigError);
MCANC_DEFINE_ERROR(ComparisonError);

#undef MCANC_DEFINE_ERROR

inline constexpr std::size_t kDefaultMaxLength = std::size_t{1} << 16;

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(std::string(what) + ": non-finite value at index " +
                               std::to_string(i));
        }
    }
}

}  // namespace detail

/// Channel counts and filter lengths of a J x K x M system.
struct SystemDims {
    std::size_t j_refs = 1;
    std::size_t k_sources = 1;
    std::size_t m_errors = 1;
    std::size_t n_taps = 1;
    std::size_t l_sec = 1;
    std::size_t lp_pri = 1;

    /// Throws SizeError naming the first offending field.
    void validate(std::size_t max_length = kDefaultMaxLength) const {
        const std::pair<const char*, std::size_t> counts[] = {
            {"j_refs", j_refs}, {"k_sources", k_sources}, {"m_errors", m_errors},
            {"n_taps", n_taps}, {"l_sec", l_sec},         {"lp_pri", lp_pri}};
        for (const auto& [name, value] : counts) {
            if (value < 1) {
                throw SizeError(std::string("SystemDims.") + name + " must be >= 1");
            }
        }
        const std::pair<const char*, std::size_t> lengths[] = {
            {"n_taps", n_taps}, {"l_sec", l_sec}, {"lp_pri", lp_pri}};
        for (const auto& [name, value] : lengths) {
            if (value > max_length) {
                throw SizeError(std::string("SystemDims.") + name + " = " +
                                std::to_string(value) + " exceeds maximum " +
                                std::to_string(max_length));
            }
        }
    }

    friend bool operator==(const SystemDims&, const SystemDims&) = default;
};

/// Dense rank-3 tensor of doubles, row-major, dim0 outermost.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0)
        : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}
    Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<double> data)
        : d0_(d0), d1_(d1), d2_(d2), data_(std::move(data)) {
        if (data_.size() != d0 * d1 * d2) {
            throw ShapeError("Tensor3: payload has " + std::to_string(data_.size()) +
                             " values, shape needs " + std::to_string(d0 * d1 * d2));
        }
    }

    std::size_t dim0() const noexcept { return d0_; }
    std::size_t dim1() const noexcept { return d1_; }
    std::size_t dim2() const noexcept { return d2_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * d1_ + j) * d2_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * d1_ + j) * d2_ + k];
    }

    /// Innermost vector at (i, j).
    std::span<double> row(std::size_t i, std::size_t j) {
        return {data_.data() + (i * d1_ + j) * d2_, d2_};
    }
    std::span<const double> row(std::size_t i, std::size_t j) const {
        return {data_.data() + (i * d1_ + j) * d2_, d2_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double frobenius_norm() const {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return std::sqrt(acc);
    }

    bool same_shape(const Tensor3& other) const noexcept {
        return d0_ == other.d0_ && d1_ == other.d1_ && d2_ == other.d2_;
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t d0_ = 0;
    std::size_t d1_ = 0;
    std::size_t d2_ = 0;
    std::vector<double> data_;
};

/// Gradient of the cost with respect to the control filter, K x J x N.
using FilterGradient = Tensor3;

/// Adaptive control filter W(n): K outputs x J references x N taps.
/// Element (k, j, i) is tap i of the filter from reference j to output k.
class ControlFilterMatrix {
public:
    ControlFilterMatrix() = default;

    ControlFilterMatrix(std::size_t outputs, std::size_t refs, std::size_t taps,
                        std::size_t max_length = kDefaultMaxLength)
        : coeffs_(checked(outputs, refs, taps, max_length)) {}

    ControlFilterMatrix(Tensor3 coeffs, std::size_t max_length = kDefaultMaxLength)
        : coeffs_(std::move(coeffs)) {
        checked(coeffs_.dim0(), coeffs_.dim1(), coeffs_.dim2(), max_length);
        detail::require_finite(coeffs_.values(), "ControlFilterMatrix");
    }

    std::size_t outputs() const noexcept { return coeffs_.dim0(); }
    std::size_t refs() const noexcept { return coeffs_.dim1(); }
    std::size_t taps() const noexcept { return coeffs_.dim2(); }

    bool matches(const SystemDims& dims) const noexcept {
        return outputs() == dims.k_sources && refs() == dims.j_refs && taps() == dims.n_taps;
    }

    std::span<const double> filter(std::size_t k, std::size_t j) const { return coeffs_.row(k, j); }
    std::span<double> filter(std::size_t k, std::size_t j) { return coeffs_.row(k, j); }

    const Tensor3& coeffs() const noexcept { return coeffs_; }
    Tensor3& coeffs() noexcept { return coeffs_; }

    friend bool operator==(const ControlFilterMatrix&, const ControlFilterMatrix&) = default;

private:
    static Tensor3 checked(std::size_t k, std::size_t j, std::size_t n, std::size_t max_length) {
        if (k < 1 || j < 1 || n < 1) throw SizeError("ControlFilterMatrix: every dimension must be >= 1");
        if (n > max_length) {
            throw SizeError("ControlFilterMatrix: n_taps = " + std::to_string(n) +
                            " exceeds maximum " + std::to_string(max_length));
        }
        return Tensor3(k, j, n);
    }

    Tensor3 coeffs_;
};

/// All-zero control filter shaped from dims (K x J x N).
inline ControlFilterMatrix new_zero_filter(const SystemDims& dims,
                                           std::size_t max_length = kDefaultMaxLength) {
    dims.validate(max_length);
    return ControlFilterMatrix(dims.k_sources, dims.j_refs, dims.n_taps, max_length);
}

/// Fixed bank of FIR impulse responses: rows x cols x len.
/// Secondary paths are M x K x L, primary paths M x J x Lp.
class PathMatrix {
public:
    PathMatrix() = default;

    explicit PathMatrix(Tensor3 taps) : taps_(std::move(taps)) {
        if (taps_.dim0() < 1 || taps_.dim1() < 1 || taps_.dim2() < 1) {
            throw SizeError("PathMatrix: every dimension must be >= 1");
        }
        detail::require_finite(taps_.values(), "PathMatrix");
    }

    std::size_t rows() const noexcept { return taps_.dim0(); }
    std::size_t cols() const noexcept { return taps_.dim1(); }
    std::size_t len() const noexcept { return taps_.dim2(); }

    std::span<const double> response(std::size_t row, std::size_t col) const {
        return taps_.row(row, col);
    }
    const Tensor3& taps() const noexcept { return taps_; }

    friend bool operator==(const PathMatrix&, const PathMatrix&) = default;

private:
    Tensor3 taps_;
};

/// One sample per channel at a single time index.
using MultiChannelFrame = std::vector<double>;

}  // namespace mcanc
