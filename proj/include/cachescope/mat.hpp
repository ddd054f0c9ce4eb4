/*
 * Copyright 2026 The cachescope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CACHESCOPE_MAT_HPP
#define CACHESCOPE_MAT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cachescope/common.hpp"

namespace cachescope {

/// Row-major dense matrix of doubles. Just enough linear algebra for the
/// model and the probes; nothing clever.
struct matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    matrix() = default;
    matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    friend bool operator==(const matrix&, const matrix&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw internal_error("dot: size mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw internal_error("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// y = M x
inline void matvec(const matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.cols || y.size() != m.rows) throw internal_error("matvec: size mismatch");
    for (std::size_t r = 0; r < m.rows; ++r) y[r] = dot(m.row(r), x);
}

/// y += M^T x
inline void matvec_transpose_add(const matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.rows || y.size() != m.cols) throw internal_error("matvec_t: size mismatch");
    for (std::size_t r = 0; r < m.rows; ++r) axpy(x[r], m.row(r), y);
}

/// M += alpha * u v^T
inline void add_outer(matrix& m, double alpha, std::span<const double> u, std::span<const double> v) {
    if (u.size() != m.rows || v.size() != m.cols) throw internal_error("add_outer: size mismatch");
    for (std::size_t r = 0; r < m.rows; ++r) axpy(alpha * u[r], v, m.row(r));
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace cachescope

#endif // CACHESCOPE_MAT_HPP
