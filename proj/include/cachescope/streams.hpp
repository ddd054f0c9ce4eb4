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

// Stream detection and counterfactual trace edits. A stream is a strided
// run of addresses (an exact arithmetic progression) possibly interleaved
// with unrelated accesses. Edits delete accesses and return an index map so
// activation records taken before and after an edit can be aligned.

#ifndef CACHESCOPE_STREAMS_HPP
#define CACHESCOPE_STREAMS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cachescope/common.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

/// A detected (or planted) stream. member_indices are sorted trace indices
/// whose addresses form the exact progression base, base+stride, ...
struct stream {
    std::vector<std::size_t> member_indices;
    std::uint64_t base = 0;
    std::int64_t stride = 0;

    std::size_t length() const { return member_indices.size(); }
    std::size_t span_begin() const { return member_indices.front(); }
    std::size_t span_end() const { return member_indices.back(); }
};

struct stream_params {
    std::size_t min_length = 8;
    std::size_t max_gap = 16;
};

/// Greedy single pass. Open candidates are keyed by the address they expect
/// next; an access extends a candidate when it matches that expectation with
/// at most max_gap foreign accesses since the previous member. New candidates
/// are seeded from every pair of accesses at most max_gap apart, except pairs
/// that are already the continuation of a live candidate. Overlaps among
/// finished candidates are resolved longest-first; a candidate that lost
/// members to a longer stream survives only if its longest intact run still
/// reaches min_length.
inline std::vector<stream> detect_streams(const trace& t, const stream_params& params = {}) {
    if (params.min_length < 3) throw usage_error("stream min_length must be >= 3");
    const std::size_t n = t.size();

    struct candidate {
        std::int64_t stride;
        std::uint64_t expected;
        std::size_t last_index;
        std::vector<std::size_t> members;
    };
    std::vector<candidate> cands;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_expected;

    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t addr = t.accesses[i].address;

        // Extend every live candidate expecting this address.
        std::vector<std::pair<std::int64_t, std::size_t>> continued; // (stride, previous tail)
        if (auto it = by_expected.find(addr); it != by_expected.end()) {
            std::vector<std::size_t> ids = std::move(it->second);
            by_expected.erase(it);
            for (std::size_t id : ids) {
                candidate& c = cands[id];
                if (i - c.last_index - 1 > params.max_gap) continue; // expired
                continued.emplace_back(c.stride, c.last_index);
                c.members.push_back(i);
                c.last_index = i;
                c.expected = addr + static_cast<std::uint64_t>(c.stride);
                by_expected[c.expected].push_back(id);
            }
        }

        // Seed new candidates from recent predecessors.
        const std::size_t window_begin = i > params.max_gap + 1 ? i - params.max_gap - 1 : 0;
        for (std::size_t j = window_begin; j < i; ++j) {
            const auto stride = static_cast<std::int64_t>(addr - t.accesses[j].address);
            if (stride == 0) continue;
            bool is_continuation = false;
            for (auto [s, tail] : continued)
                if (s == stride && tail == j) {
                    is_continuation = true;
                    break;
                }
            if (is_continuation) continue;
            candidate c;
            c.stride = stride;
            c.expected = addr + static_cast<std::uint64_t>(stride);
            c.last_index = i;
            c.members = {j, i};
            by_expected[c.expected].push_back(cands.size());
            cands.push_back(std::move(c));
        }
    }

    std::vector<std::size_t> order;
    for (std::size_t id = 0; id < cands.size(); ++id)
        if (cands[id].members.size() >= params.min_length) order.push_back(id);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cands[a].members.size() != cands[b].members.size())
            return cands[a].members.size() > cands[b].members.size();
        if (cands[a].members != cands[b].members) return cands[a].members < cands[b].members;
        return cands[a].stride < cands[b].stride;
    });

    std::vector<bool> claimed(n, false);
    std::vector<stream> out;
    for (std::size_t id : order) {
        const candidate& c = cands[id];
        // Longest intact run of unclaimed members keeps the progression exact.
        std::size_t best_begin = 0, best_len = 0, run_begin = 0, run_len = 0;
        for (std::size_t k = 0; k <= c.members.size(); ++k) {
            if (k < c.members.size() && !claimed[c.members[k]]) {
                if (run_len == 0) run_begin = k;
                ++run_len;
            } else {
                if (run_len > best_len) {
                    best_len = run_len;
                    best_begin = run_begin;
                }
                run_len = 0;
            }
        }
        if (best_len < params.min_length) continue;
        stream s;
        s.stride = c.stride;
        s.member_indices.assign(c.members.begin() + static_cast<std::ptrdiff_t>(best_begin),
                                c.members.begin() + static_cast<std::ptrdiff_t>(best_begin + best_len));
        s.base = t.accesses[s.member_indices.front()].address;
        for (std::size_t m : s.member_indices) claimed[m] = true;
        out.push_back(std::move(s));
    }

    std::sort(out.begin(), out.end(),
              [](const stream& a, const stream& b) { return a.member_indices < b.member_indices; });
    return out;
}

/// A trace edit: the surviving accesses plus the old->new index map
/// (-1 marks deleted indices). Probes use the map to align activation
/// records recorded before and after the edit.
struct trace_edit {
    trace edited;
    std::vector<std::ptrdiff_t> index_map;
};

namespace detail {

inline void check_stream_valid(const trace& t, const stream& s) {
    if (s.member_indices.empty()) throw usage_error("empty stream");
    std::uint64_t expect = s.base;
    std::size_t prev = 0;
    bool first = true;
    for (std::size_t idx : s.member_indices) {
        if (idx >= t.size()) throw usage_error("stale stream: index out of range");
        if (!first && idx <= prev) throw usage_error("stream indices must be strictly increasing");
        if (t.accesses[idx].address != expect)
            throw usage_error("stale stream: addresses no longer match the progression");
        expect += static_cast<std::uint64_t>(s.stride);
        prev = idx;
        first = false;
    }
}

inline trace_edit delete_indices(const trace& t, const std::vector<std::size_t>& sorted_doomed) {
    trace_edit result;
    result.edited.line_size = t.line_size;
    result.index_map.assign(t.size(), -1);
    std::size_t d = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (d < sorted_doomed.size() && sorted_doomed[d] == i) {
            ++d;
            continue;
        }
        result.index_map[i] = static_cast<std::ptrdiff_t>(result.edited.accesses.size());
        result.edited.accesses.push_back(t.accesses[i]);
    }
    if (result.edited.empty()) throw usage_error("edit would leave an empty trace");
    return result;
}

} // namespace detail

/// Delete every member access of the stream. Surviving accesses keep their
/// relative order.
inline trace_edit remove_stream(const trace& t, const stream& s) {
    detail::check_stream_valid(t, s);
    return detail::delete_indices(t, s.member_indices);
}

/// Delete the first floor((1-fraction)*count) member accesses, keeping the
/// final ceil(fraction*count). fraction 1.0 is the identity edit.
inline trace_edit keep_stream_suffix(const trace& t, const stream& s, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0) throw usage_error("fraction must be in (0, 1]");
    detail::check_stream_valid(t, s);
    const std::size_t count = s.member_indices.size();
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count)));
    const std::size_t drop = count - std::min(keep, count);
    std::vector<std::size_t> doomed(s.member_indices.begin(),
                                    s.member_indices.begin() + static_cast<std::ptrdiff_t>(drop));
    return detail::delete_indices(t, doomed);
}

} // namespace cachescope

#endif // CACHESCOPE_STREAMS_HPP
