#pragma once

#include <cmath>
#include <vector>

#include "biatt/common.hpp"

namespace biatt {

// Dense row-major matrix of doubles. Vectors are rows x 1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor vec(int n) { return Tensor(n, 1); }

    int size() const { return rows * cols; }
    bool is_vector() const { return cols == 1; }
    bool is_scalar() const { return rows == 1 && cols == 1; }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// T x F matrix of per-frame FBank amplitudes (linear, nonnegative).
struct FeatureSequence {
    Tensor values;

    FeatureSequence() = default;
    explicit FeatureSequence(Tensor t) : values(std::move(t)) {}
    FeatureSequence(int frames, int bands) : values(frames, bands) {}

    int frames() const { return values.rows; }
    int bands() const { return values.cols; }
};

// T x F gain mask; entries live in (0,1) when produced by the model.
struct GainSequence {
    Tensor values;

    GainSequence() = default;
    explicit GainSequence(Tensor t) : values(std::move(t)) {}
    GainSequence(int frames, int bands) : values(frames, bands) {}

    int frames() const { return values.rows; }
    int bands() const { return values.cols; }
};

}  // namespace biatt
