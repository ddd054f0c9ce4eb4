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

// Interpretability instrumentation: PCA over recorded activations, principal
// component vs. phase correlation, and difference metrics between records
// taken before and after a counterfactual trace edit.

#ifndef CACHESCOPE_PROBE_HPP
#define CACHESCOPE_PROBE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cachescope/common.hpp"
#include "cachescope/mat.hpp"
#include "cachescope/model.hpp"
#include "cachescope/phases.hpp"

namespace cachescope {

enum class record_kind { hidden_state, address_embedding, attention_weights };

inline std::string to_string(record_kind k) {
    switch (k) {
    case record_kind::hidden_state: return "hidden-state";
    case record_kind::address_embedding: return "address-embedding";
    case record_kind::attention_weights: return "attention-weights";
    }
    throw internal_error("unknown record kind");
}

inline record_kind record_kind_from_string(const std::string& s) {
    if (s == "hidden-state") return record_kind::hidden_state;
    if (s == "address-embedding") return record_kind::address_embedding;
    if (s == "attention-weights") return record_kind::attention_weights;
    throw data_error("unknown record kind: " + s);
}

/// A timesteps-x-dims (or vocabulary-x-dims) capture of model internals.
struct activation_record {
    matrix data;
    record_kind kind = record_kind::hidden_state;
};

struct pca_result {
    matrix components;                           // k x dims, orthonormal rows
    std::vector<double> explained_variance_ratio; // k entries, descending
    matrix projections;                          // rows x k
    std::vector<double> mean;                    // subtracted column mean
};

namespace detail {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs come
/// back sorted by descending eigenvalue; vectors are rows of `vectors`.
/// Quadratic convergence makes ~30 sweeps more than enough at these sizes.
inline void jacobi_symmetric_eig(matrix a, std::vector<double>& values, matrix& vectors) {
    if (a.rows != a.cols) throw internal_error("jacobi: matrix not square");
    const std::size_t n = a.rows;
    matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double norm = 0;
    for (double x : a.data) norm += x * x;
    norm = std::sqrt(norm);
    const double stop = std::max(norm, 1.0) * 1e-15;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    values.resize(n);
    vectors = matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = diag[order[r]];
        for (std::size_t k = 0; k < n; ++k) vectors(r, k) = v(k, order[r]);
    }
}

} // namespace detail

/// PCA of a record: center columns, eigendecompose the covariance with the
/// Jacobi iteration, keep the top-k directions. Sign convention: the
/// largest-magnitude entry of each component is positive. Zero-variance
/// input still yields well-defined components with all ratios 0.
inline pca_result pca(const matrix& data, std::size_t k) {
    if (data.rows < 2) throw usage_error("pca needs at least 2 rows");
    if (k == 0 || k > std::min(data.rows, data.cols))
        throw usage_error("pca: k must be in 1..min(rows, dims)");

    const std::size_t n = data.rows, d = data.cols;
    pca_result out;
    out.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.mean[j] += data(i, j);
    for (double& mj : out.mean) mj /= static_cast<double>(n);

    matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = data(i, j) - out.mean[j];

    matrix cov(d, d);
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = p; q < d; ++q) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += centered(i, p) * centered(i, q);
            cov(p, q) = cov(q, p) = s / static_cast<double>(n - 1);
        }

    std::vector<double> values;
    matrix vectors;
    detail::jacobi_symmetric_eig(cov, values, vectors);

    double total = 0;
    for (double& lambda : values) {
        if (lambda < 0) lambda = 0; // numerical noise below rank
        total += lambda;
    }

    out.components = matrix(k, d);
    out.explained_variance_ratio.assign(k, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(vectors(r, j)) > std::abs(vectors(r, arg))) arg = j;
        const double flip = vectors(r, arg) < 0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) out.components(r, j) = flip * vectors(r, j);
        if (total > 0) out.explained_variance_ratio[r] = values[r] / total;
    }

    out.projections = matrix(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r)
            out.projections(i, r) = dot(centered.row(i), out.components.row(r));
    return out;
}

/// Pearson r between a component's projection series and the 0/1 indicator
/// of each phase. A zero-variance series has no defined r and is reported
/// as missing.
struct correlation_report {
    std::size_t num_components = 0;
    std::size_t num_phases = 0;
    std::vector<std::optional<double>> r; // component-major

    std::optional<double> at(std::size_t component, std::uint32_t phase) const {
        return r[component * num_phases + phase];
    }
};

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw usage_error("pearson: length mismatch");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

inline correlation_report correlate_with_phases(const pca_result& result,
                                                const phase_labeling& labeling) {
    if (result.projections.rows != labeling.labels.size())
        throw usage_error("projection rows do not match label count");
    correlation_report report;
    report.num_components = result.projections.cols;
    report.num_phases = labeling.num_phases;
    report.r.resize(report.num_components * report.num_phases);

    std::vector<double> series(labeling.labels.size());
    std::vector<double> indicator(labeling.labels.size());
    for (std::size_t c = 0; c < report.num_components; ++c) {
        for (std::size_t i = 0; i < series.size(); ++i) series[i] = result.projections(i, c);
        for (std::uint32_t phase = 0; phase < labeling.num_phases; ++phase) {
            for (std::size_t i = 0; i < indicator.size(); ++i)
                indicator[i] = labeling.labels[i] == phase ? 1.0 : 0.0;
            report.r[c * report.num_phases + phase] = pearson(series, indicator);
        }
    }
    return report;
}

/// Flip b's components (and projection columns) wherever they point away
/// from a's. PC signs are arbitrary, so difference metrics between two PCA
/// results are meaningless without this.
inline void sign_align(pca_result& b, const pca_result& a) {
    const std::size_t k = std::min(a.components.rows, b.components.rows);
    for (std::size_t r = 0; r < k; ++r) {
        if (a.components.cols != b.components.cols)
            throw usage_error("sign_align: component dimensions differ");
        if (dot(a.components.row(r), b.components.row(r)) < 0) {
            for (std::size_t j = 0; j < b.components.cols; ++j) b.components(r, j) *= -1;
            for (std::size_t i = 0; i < b.projections.rows; ++i) b.projections(i, r) *= -1;
        }
    }
}

struct compare_result {
    double mean_abs_diff = 0;
    std::vector<double> per_dim; // mean abs diff per column
    std::size_t aligned_rows = 0;
};

/// Mean absolute difference over aligned (row, dim) pairs. index_map maps
/// rows of a to rows of b; entries < 0 (rows deleted by an edit) are skipped.
inline compare_result compare_records(const matrix& a, const matrix& b,
                                      const std::vector<std::ptrdiff_t>& index_map) {
    if (a.cols != b.cols) throw usage_error("compare_records: dimension mismatch");
    if (index_map.size() != a.rows) throw usage_error("compare_records: map does not cover record");

    compare_result out;
    out.per_dim.assign(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const std::ptrdiff_t j = index_map[i];
        if (j < 0) continue;
        if (static_cast<std::size_t>(j) >= b.rows)
            throw usage_error("compare_records: map points past the second record");
        ++out.aligned_rows;
        for (std::size_t d = 0; d < a.cols; ++d)
            out.per_dim[d] += std::abs(a(i, d) - b(static_cast<std::size_t>(j), d));
    }
    if (out.aligned_rows == 0) throw usage_error("compare_records: empty alignment");
    double total = 0;
    for (double& v : out.per_dim) {
        total += v;
        v /= static_cast<double>(out.aligned_rows);
    }
    out.mean_abs_diff = total / static_cast<double>(out.aligned_rows * a.cols);
    return out;
}

inline std::vector<std::ptrdiff_t> identity_map(std::size_t n) {
    std::vector<std::ptrdiff_t> map(n);
    std::iota(map.begin(), map.end(), 0);
    return map;
}

/// Per-line join of embedding-space coordinates with hit statistics: for
/// every line the trace touches, its top-k embedding projections plus how
/// often accesses to it hit. Lines outside the model's vocabulary aggregate
/// into one OOV row.
struct embedding_report_row {
    std::uint64_t line = 0;
    bool oov = false;
    std::vector<double> projections;
    std::uint64_t accesses = 0;
    std::uint64_t hits = 0;
    double hit_rate = 0;
};

struct embedding_report {
    std::vector<embedding_report_row> rows;
    pca_result pca;
};

inline embedding_report make_embedding_report(const caching_model& m, const trace& t,
                                              const sim_result& sim, std::size_t k) {
    if (sim.hits.size() != t.size()) throw usage_error("sim result does not match trace");
    embedding_report report;
    const std::size_t kk = std::min({k, m.params.embed_addr.cols, m.params.embed_addr.rows});
    report.pca = pca(m.params.embed_addr, kk);

    std::map<std::size_t, embedding_report_row> by_row; // embedding row -> stats
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint64_t line = t.line_at(i);
        const std::size_t row = m.addr_index(line);
        auto& r = by_row[row];
        if (r.accesses == 0) {
            r.line = line;
            r.oov = row == m.addr_vocab.size();
        }
        ++r.accesses;
        r.hits += sim.hits[i];
    }
    for (auto& [row, r] : by_row) {
        r.hit_rate = static_cast<double>(r.hits) / static_cast<double>(r.accesses);
        r.projections.assign(report.pca.projections.row(row).begin(),
                             report.pca.projections.row(row).end());
        report.rows.push_back(std::move(r));
    }
    return report;
}

} // namespace cachescope

#endif // CACHESCOPE_PROBE_HPP
