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

// Phase extraction. A trace is cut into fixed-length slices, each slice is
// featurized by two L1-normalized histograms (forward reuse distances and
// delta program counters), neighboring slices are merged while highly
// similar, and the resulting segments are clustered globally with complete
// linkage. Phases come out as a per-timestep labeling.

#ifndef CACHESCOPE_PHASES_HPP
#define CACHESCOPE_PHASES_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "cachescope/common.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

/// Histogram bin layout shared by every slice of one trace.
/// Reuse bins are logarithmic: finite distance d lands in floor(log2(d)),
/// capped at reuse_log2_max, plus one bin for never-reused lines.
/// Delta-PC bins are sign-split: 0 and +-1..+-dpc_exact individually, then
/// +-(dpc_exact+1 .. dpc_near), +-(dpc_near+1 .. dpc_far), and beyond.
struct bin_config {
    int reuse_log2_max = 20;
    std::int64_t dpc_exact = 8;
    std::int64_t dpc_near = 64;
    std::int64_t dpc_far = 4096;

    std::size_t reuse_bins() const { return static_cast<std::size_t>(reuse_log2_max) + 2; }
    std::size_t dpc_bins() const { return 1 + 2 * static_cast<std::size_t>(dpc_exact) + 6; }

    std::size_t reuse_bin(std::uint64_t d) const {
        if (d == reuse_infinite) return reuse_bins() - 1;
        if (d == 0) throw internal_error("reuse distance 0");
        int lg = std::bit_width(d) - 1; // floor(log2(d))
        return static_cast<std::size_t>(std::min(lg, reuse_log2_max));
    }

    std::size_t dpc_bin(std::int64_t delta) const {
        const std::size_t ex = static_cast<std::size_t>(dpc_exact);
        const std::size_t pos_base = 1;            // +1..+dpc_exact
        const std::size_t neg_base = pos_base + ex; // -1..-dpc_exact
        const std::size_t ranges = neg_base + ex;   // 6 range bins
        if (delta == 0) return 0;
        const bool neg = delta < 0;
        const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(delta + 1)) + 1
                                      : static_cast<std::uint64_t>(delta);
        if (mag <= static_cast<std::uint64_t>(dpc_exact))
            return (neg ? neg_base : pos_base) + static_cast<std::size_t>(mag) - 1;
        std::size_t r;
        if (mag <= static_cast<std::uint64_t>(dpc_near)) r = 0;
        else if (mag <= static_cast<std::uint64_t>(dpc_far)) r = 2;
        else r = 4;
        return ranges + r + (neg ? 1 : 0);
    }
};

/// Features of one slice (or of a merged segment): two normalized histograms
/// and the half-open span [begin, end) they were computed over.
struct slice_feature {
    std::vector<double> reuse_hist;
    std::vector<double> dpc_hist;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - begin; }
};

/// Per-timestep phase ids, contiguous 0..num_phases-1, assigned by first
/// occurrence in the trace.
struct phase_labeling {
    std::vector<std::uint32_t> labels;
    std::uint32_t num_phases = 0;

    friend bool operator==(const phase_labeling&, const phase_labeling&) = default;
};

inline double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw internal_error("histogram size mismatch");
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

/// The merge/cluster metric: reuse L1 plus weighted delta-PC L1, in [0, 2+2w].
inline double combined_distance(const slice_feature& a, const slice_feature& b, double dpc_weight = 1.0) {
    return l1_distance(a.reuse_hist, b.reuse_hist) + dpc_weight * l1_distance(a.dpc_hist, b.dpc_hist);
}

namespace detail {

inline void l1_normalize(std::vector<double>& h) {
    double total = std::accumulate(h.begin(), h.end(), 0.0);
    if (total > 0)
        for (double& v : h) v /= total;
}

} // namespace detail

/// Cut the trace into consecutive non-overlapping slices of slice_len and
/// featurize each. A final partial slice is kept on its own if it is at
/// least half a slice, otherwise it joins its predecessor. The delta PC at
/// index i is pc[i] - pc[i-1] (signed); the first element of a slice uses
/// the global predecessor, and index 0 contributes no delta.
inline std::vector<slice_feature> slice_features(const trace& t, const reuse_profile& profile,
                                                 std::size_t slice_len, const bin_config& bins = {}) {
    if (slice_len < 2) throw usage_error("slice_len must be >= 2");
    if (t.size() < slice_len) throw usage_error("trace shorter than one slice");
    if (profile.distances.size() != t.size()) throw usage_error("reuse profile does not cover trace");

    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t begin = 0; begin < t.size(); begin += slice_len)
        spans.emplace_back(begin, std::min(begin + slice_len, t.size()));
    if (spans.size() > 1 && 2 * (spans.back().second - spans.back().first) < slice_len) {
        spans[spans.size() - 2].second = spans.back().second;
        spans.pop_back();
    }

    std::vector<slice_feature> features;
    features.reserve(spans.size());
    for (auto [begin, end] : spans) {
        slice_feature f;
        f.begin = begin;
        f.end = end;
        f.reuse_hist.assign(bins.reuse_bins(), 0.0);
        f.dpc_hist.assign(bins.dpc_bins(), 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            f.reuse_hist[bins.reuse_bin(profile.distances[i])] += 1.0;
            if (i > 0) {
                const auto delta = static_cast<std::int64_t>(t.accesses[i].pc - t.accesses[i - 1].pc);
                f.dpc_hist[bins.dpc_bin(delta)] += 1.0;
            }
        }
        detail::l1_normalize(f.reuse_hist);
        detail::l1_normalize(f.dpc_hist);
        features.push_back(std::move(f));
    }
    return features;
}

/// Merge neighboring slices, most-similar adjacent pair first, while the
/// pair's combined distance is below threshold. A merged segment's
/// histograms are the length-weighted mean of its members'. The threshold
/// only decides when to stop, so raising it can only reduce segment count.
inline std::vector<slice_feature> merge_neighbors(std::vector<slice_feature> features, double threshold,
                                                  double dpc_weight = 1.0) {
    if (features.empty()) throw usage_error("merge_neighbors: no slices");
    if (threshold <= 0) throw usage_error("merge threshold must be > 0");

    while (features.size() > 1) {
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < features.size(); ++i) {
            double d = combined_distance(features[i], features[i + 1], dpc_weight);
            if (d < best_dist) {
                best_dist = d;
                best = i;
            }
        }
        if (best_dist >= threshold) break;

        slice_feature& a = features[best];
        const slice_feature& b = features[best + 1];
        const double wa = static_cast<double>(a.length());
        const double wb = static_cast<double>(b.length());
        for (std::size_t k = 0; k < a.reuse_hist.size(); ++k)
            a.reuse_hist[k] = (wa * a.reuse_hist[k] + wb * b.reuse_hist[k]) / (wa + wb);
        for (std::size_t k = 0; k < a.dpc_hist.size(); ++k)
            a.dpc_hist[k] = (wa * a.dpc_hist[k] + wb * b.dpc_hist[k]) / (wa + wb);
        a.end = b.end;
        features.erase(features.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    }
    return features;
}

/// Agglomerative clustering of segments under the combined metric with
/// complete linkage, cut at threshold. Segments in one cluster share a phase
/// id; ids are assigned by first occurrence in the trace.
inline phase_labeling global_cluster(const std::vector<slice_feature>& segments, double threshold,
                                     double dpc_weight = 1.0) {
    if (segments.empty()) throw usage_error("global_cluster: no segments");
    const std::size_t n = segments.size();

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i][j] = dist[j][i] = combined_distance(segments[i], segments[j], dpc_weight);

    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});

    auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        double worst = 0;
        for (std::size_t i : a)
            for (std::size_t j : b) worst = std::max(worst, dist[i][j]);
        return worst;
    };

    while (clusters.size() > 1) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                double d = linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        if (best >= threshold) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    // Order clusters by their earliest segment so ids follow first occurrence.
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    phase_labeling out;
    out.num_phases = static_cast<std::uint32_t>(clusters.size());
    out.labels.assign(segments.back().end, 0);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t seg : clusters[c])
            for (std::size_t i = segments[seg].begin; i < segments[seg].end; ++i)
                out.labels[i] = static_cast<std::uint32_t>(c);
    return out;
}

/// Convenience driver: slices -> merge -> global clustering.
struct phase_params {
    std::size_t slice_len = 1000;
    double merge_threshold = 0.4;
    double cluster_threshold = 0.4;
    double dpc_weight = 1.0;
    bin_config bins;
};

inline phase_labeling find_phases(const trace& t, const phase_params& p = {}) {
    const reuse_profile profile = compute_reuse_profile(t);
    auto slices = slice_features(t, profile, p.slice_len, p.bins);
    auto segments = merge_neighbors(std::move(slices), p.merge_threshold, p.dpc_weight);
    return global_cluster(segments, p.cluster_threshold, p.dpc_weight);
}

/// Occurrence counts per (phase id, cache line). Backs the phase-frequency
/// eviction baseline: "how often was this line touched while the program was
/// in this phase".
struct phase_frequency_table {
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint64_t> counts;

    std::uint64_t count(std::uint32_t phase, std::uint64_t line) const {
        auto it = counts.find({phase, line});
        return it == counts.end() ? 0 : it->second;
    }
};

inline phase_frequency_table build_phase_frequency_table(const trace& t, const phase_labeling& labeling) {
    if (labeling.labels.size() != t.size())
        throw usage_error("phase labeling does not cover trace");
    phase_frequency_table table;
    for (std::size_t i = 0; i < t.size(); ++i)
        ++table.counts[{labeling.labels[i], t.line_at(i)}];
    return table;
}

} // namespace cachescope

#endif // CACHESCOPE_PHASES_HPP
