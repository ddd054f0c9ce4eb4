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

// Synthetic traces with planted structure. Each segment plants a phase
// (working-set + PC behavior) and optionally streams mixed in at a fixed
// ratio. Ground-truth phase labels and stream memberships are emitted
// alongside the trace so recovery claims are directly testable.

#ifndef CACHESCOPE_SYNTH_HPP
#define CACHESCOPE_SYNTH_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "cachescope/common.hpp"
#include "cachescope/phases.hpp"
#include "cachescope/streams.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

enum class working_set_kind { uniform, cyclic };

/// Background accesses of a segment: `lines` cache lines starting at `base`,
/// visited uniformly at random or in a fixed cycle.
struct working_set_spec {
    working_set_kind kind = working_set_kind::uniform;
    std::uint64_t base = 0;
    std::uint64_t lines = 64;
};

/// PC behavior of a segment's background accesses: pc walks base,
/// base+delta, ... and wraps to base every `period` steps, so the delta-PC
/// histogram is dominated by `delta` with one long jump per period.
struct pc_walk_spec {
    std::uint64_t base = 0x1000;
    std::int64_t delta = 4;
    std::uint64_t period = 64;
};

struct planted_stream_spec {
    std::uint64_t base = 0;
    std::int64_t stride = 64;
    std::size_t length = 0;
    std::uint64_t pc = 0; // the pc all of this stream's accesses carry
};

struct segment_spec {
    std::size_t duration = 0;
    std::uint32_t phase_id = 0;
    working_set_spec working_set;
    pc_walk_spec pc;
    std::vector<planted_stream_spec> streams;
    std::size_t stream_every = 0; // one stream access every k positions
    bool require_disjoint = false;
};

struct synthetic_spec {
    std::vector<segment_spec> segments;
    std::uint64_t line_size = 64;
    std::uint64_t seed = 0;
};

struct synthetic_result {
    trace t;
    phase_labeling phases;       // ground truth, index-aligned with t
    std::vector<stream> streams; // ground truth member indices
};

namespace detail {

inline std::pair<std::uint64_t, std::uint64_t> stream_byte_span(const planted_stream_spec& s) {
    const auto last = s.base + static_cast<std::uint64_t>(s.stride) * (s.length - 1);
    return s.stride >= 0 ? std::pair{s.base, last} : std::pair{last, s.base};
}

} // namespace detail

/// Deterministic in the spec: the same spec yields a byte-identical trace.
inline synthetic_result generate_synthetic(const synthetic_spec& spec) {
    if (spec.segments.empty()) throw usage_error("synthetic spec has no segments");
    if (!is_power_of_two(spec.line_size)) throw usage_error("line_size must be a power of two");

    std::uint32_t max_phase = 0;
    for (const auto& seg : spec.segments) {
        if (seg.duration == 0) throw usage_error("segment duration must be > 0");
        if (seg.working_set.lines == 0) throw usage_error("working set must have >= 1 line");
        if (!seg.streams.empty() && seg.stream_every == 0)
            throw usage_error("stream_every must be >= 1 when streams are planted");
        max_phase = std::max(max_phase, seg.phase_id);
        for (const auto& s : seg.streams) {
            if (s.stride == 0) throw usage_error("stream stride must be nonzero");
            if (s.length == 0) throw usage_error("stream length must be > 0");
            if (seg.require_disjoint) {
                auto [lo, hi] = detail::stream_byte_span(s);
                const std::uint64_t ws_lo = seg.working_set.base;
                const std::uint64_t ws_hi = ws_lo + seg.working_set.lines * spec.line_size - 1;
                if (lo <= ws_hi && ws_lo <= hi)
                    throw usage_error("stream overlaps working set but disjointness was requested");
            }
        }
    }
    // Phase ids must be usable as dense labels.
    std::vector<bool> seen(max_phase + 1, false);
    for (const auto& seg : spec.segments) seen[seg.phase_id] = true;
    for (std::size_t p = 0; p <= max_phase; ++p)
        if (!seen[p]) throw usage_error("planted phase ids must be contiguous from 0");

    std::mt19937_64 rng(spec.seed);
    synthetic_result out;
    out.t.line_size = spec.line_size;
    out.phases.num_phases = max_phase + 1;

    for (const auto& seg : spec.segments) {
        std::vector<stream> planted(seg.streams.size());
        std::vector<std::size_t> emitted(seg.streams.size(), 0);
        for (std::size_t k = 0; k < seg.streams.size(); ++k) {
            planted[k].base = seg.streams[k].base;
            planted[k].stride = seg.streams[k].stride;
        }
        std::size_t round_robin = 0;
        std::uint64_t cyclic_pos = 0;
        std::uint64_t pc_step = 0;

        for (std::size_t p = 0; p < seg.duration; ++p) {
            const std::size_t index = out.t.size();
            bool from_stream = false;
            if (!seg.streams.empty() && p % seg.stream_every == 0) {
                // Round-robin over streams that still have accesses left.
                for (std::size_t tries = 0; tries < seg.streams.size(); ++tries) {
                    const std::size_t k = (round_robin + tries) % seg.streams.size();
                    if (emitted[k] < seg.streams[k].length) {
                        const auto& s = seg.streams[k];
                        memory_access a;
                        a.address = s.base + static_cast<std::uint64_t>(s.stride) * emitted[k];
                        a.pc = s.pc;
                        out.t.accesses.push_back(a);
                        planted[k].member_indices.push_back(index);
                        ++emitted[k];
                        round_robin = (k + 1) % seg.streams.size();
                        from_stream = true;
                        break;
                    }
                }
            }
            if (!from_stream) {
                memory_access a;
                std::uint64_t line_idx;
                if (seg.working_set.kind == working_set_kind::cyclic) {
                    line_idx = cyclic_pos++ % seg.working_set.lines;
                } else {
                    line_idx = std::uniform_int_distribution<std::uint64_t>(
                        0, seg.working_set.lines - 1)(rng);
                }
                a.address = seg.working_set.base + line_idx * spec.line_size;
                a.pc = seg.pc.base +
                       static_cast<std::uint64_t>(seg.pc.delta) * (pc_step % seg.pc.period);
                ++pc_step;
                out.t.accesses.push_back(a);
            }
            out.phases.labels.push_back(seg.phase_id);
        }

        for (auto& s : planted)
            if (!s.member_indices.empty()) out.streams.push_back(std::move(s));
    }
    return out;
}

} // namespace cachescope

#endif // CACHESCOPE_SYNTH_HPP
