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

// Set-associative cache simulator with pluggable eviction policies.
// Policies observe every access and are consulted only on a miss in a full
// set; cold misses into a free way never reach the policy.

#ifndef CACHESCOPE_CACHESIM_HPP
#define CACHESCOPE_CACHESIM_HPP

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachescope/common.hpp"
#include "cachescope/phases.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

struct cache_config {
    std::uint64_t total_lines = 1024; // 64 sets x 16 ways by default
    std::uint64_t associativity = 16;
    std::uint64_t line_size = 64;

    std::uint64_t num_sets() const { return total_lines / associativity; }

    void validate() const {
        if (total_lines == 0 || associativity == 0) throw usage_error("cache dimensions must be > 0");
        if (total_lines % associativity != 0)
            throw usage_error("total_lines must be divisible by associativity");
        if (!is_power_of_two(num_sets())) throw usage_error("number of sets must be a power of two");
        if (!is_power_of_two(line_size)) throw usage_error("line_size must be a power of two");
    }
};

struct eviction_event {
    std::size_t index = 0;
    std::uint64_t victim = 0;
    std::vector<std::uint64_t> candidates; // set contents at decision time
};

struct sim_result {
    std::vector<std::uint8_t> hits; // 1 = hit
    std::vector<eviction_event> evictions;
    std::size_t hit_count = 0;
    double hit_rate = 0.0;
};

/// Eviction decision procedure. observe() fires once per access after it has
/// been resolved (and after any fill), so recency state includes the current
/// access. choose_victim() must return one of `residents`.
class eviction_policy {
public:
    virtual ~eviction_policy() = default;
    virtual std::string name() const = 0;
    virtual void reset() {}
    virtual void observe(std::size_t /*index*/, const memory_access& /*access*/,
                         std::uint64_t /*line*/, bool /*hit*/) {}
    virtual std::uint64_t choose_victim(std::size_t index, const memory_access& incoming,
                                        std::uint64_t incoming_line,
                                        std::span<const std::uint64_t> residents) = 0;
};

/// Deterministic rollout. Set index = line id mod num_sets. A policy naming
/// a non-resident victim is a broken contract and aborts the run.
inline sim_result simulate(const trace& t, const cache_config& cfg, eviction_policy& policy) {
    cfg.validate();
    if (t.empty()) throw usage_error("cannot simulate an empty trace");
    if (cfg.line_size != t.line_size)
        throw usage_error("cache line_size does not match the trace's line_size");

    const std::uint64_t num_sets = cfg.num_sets();
    std::vector<std::vector<std::uint64_t>> sets(num_sets);
    for (auto& s : sets) s.reserve(cfg.associativity);

    policy.reset();
    sim_result result;
    result.hits.reserve(t.size());

    for (std::size_t i = 0; i < t.size(); ++i) {
        const memory_access& access = t.accesses[i];
        const std::uint64_t line = line_of(access.address, cfg.line_size);
        auto& ways = sets[line % num_sets];

        const bool hit = std::find(ways.begin(), ways.end(), line) != ways.end();
        if (!hit) {
            if (ways.size() == cfg.associativity) {
                const std::uint64_t victim =
                    policy.choose_victim(i, access, line, std::span<const std::uint64_t>(ways));
                auto it = std::find(ways.begin(), ways.end(), victim);
                if (it == ways.end())
                    throw internal_error("policy \"" + policy.name() +
                                         "\" chose a non-resident victim at index " + std::to_string(i));
                result.evictions.push_back({i, victim, ways});
                ways.erase(it);
            }
            ways.push_back(line);
        }
        policy.observe(i, access, line, hit);
        result.hits.push_back(hit ? 1 : 0);
        if (hit) ++result.hit_count;
    }
    result.hit_rate = static_cast<double>(result.hit_count) / static_cast<double>(t.size());
    return result;
}

/// Least Recently Used: victim is the resident line whose last access is
/// oldest. Recency is updated on hits and on fills.
class lru_policy final : public eviction_policy {
public:
    std::string name() const override { return "lru"; }
    void reset() override { last_use_.clear(); }

    void observe(std::size_t index, const memory_access&, std::uint64_t line, bool) override {
        last_use_[line] = index;
    }

    std::uint64_t choose_victim(std::size_t, const memory_access&, std::uint64_t,
                                std::span<const std::uint64_t> residents) override {
        std::uint64_t victim = residents.front();
        std::size_t oldest = last_use_.at(victim);
        for (std::uint64_t r : residents) {
            const std::size_t when = last_use_.at(r);
            if (when < oldest || (when == oldest && r < victim)) {
                oldest = when;
                victim = r;
            }
        }
        return victim;
    }

private:
    std::unordered_map<std::uint64_t, std::size_t> last_use_;
};

/// Offline-optimal eviction: victim is the resident line whose next use lies
/// farthest in the future. Next uses come from one backward pass over the
/// full trace. Lines never used again are preferred victims; among those,
/// the lowest line id keeps decisions deterministic.
class belady_policy final : public eviction_policy {
public:
    explicit belady_policy(const trace& t) : profile_(compute_reuse_profile(t)) {}

    std::string name() const override { return "belady"; }
    void reset() override { last_access_.clear(); }

    void observe(std::size_t index, const memory_access&, std::uint64_t line, bool) override {
        last_access_[line] = index;
    }

    std::uint64_t choose_victim(std::size_t, const memory_access&, std::uint64_t,
                                std::span<const std::uint64_t> residents) override {
        std::uint64_t victim = 0;
        std::uint64_t farthest = 0;
        bool have = false;
        for (std::uint64_t r : residents) {
            const std::size_t at = last_access_.at(r);
            const std::uint64_t d = profile_.distances[at];
            const std::uint64_t next = d == reuse_infinite ? reuse_infinite : at + d;
            // Prefer the farthest next use; break INFINITE ties by line id.
            if (!have || next > farthest || (next == farthest && r < victim)) {
                have = true;
                farthest = next;
                victim = r;
            }
        }
        return victim;
    }

private:
    reuse_profile profile_;
    std::unordered_map<std::uint64_t, std::size_t> last_access_;
};

/// The lookup-table baseline: in phase p, evict the resident line with the
/// lowest occurrence count under p. Lines missing from the table count as 0;
/// ties fall to the lowest line id.
class phase_freq_policy final : public eviction_policy {
public:
    phase_freq_policy(phase_labeling labeling, phase_frequency_table table)
        : labeling_(std::move(labeling)), table_(std::move(table)) {}

    std::string name() const override { return "phase-freq"; }

    std::uint64_t choose_victim(std::size_t index, const memory_access&, std::uint64_t,
                                std::span<const std::uint64_t> residents) override {
        if (index >= labeling_.labels.size())
            throw usage_error("phase labeling does not cover the simulated trace");
        const std::uint32_t phase = labeling_.labels[index];
        std::uint64_t victim = residents.front();
        std::uint64_t best = table_.count(phase, victim);
        for (std::uint64_t r : residents) {
            const std::uint64_t c = table_.count(phase, r);
            if (c < best || (c == best && r < victim)) {
                best = c;
                victim = r;
            }
        }
        return victim;
    }

private:
    phase_labeling labeling_;
    phase_frequency_table table_;
};

inline std::unique_ptr<eviction_policy> policy_lru() { return std::make_unique<lru_policy>(); }

inline std::unique_ptr<eviction_policy> policy_belady(const trace& t) {
    return std::make_unique<belady_policy>(t);
}

inline std::unique_ptr<eviction_policy> policy_phase_freq(phase_labeling labeling,
                                                          phase_frequency_table table) {
    return std::make_unique<phase_freq_policy>(std::move(labeling), std::move(table));
}

/// Rolling mean of the hit flags: value at i covers max(0, i-window+1)..i and
/// divides by the number of indices actually covered.
inline std::vector<double> rolling_hit_rate(std::span<const std::uint8_t> hits, std::size_t window) {
    if (window == 0) throw usage_error("rolling window must be >= 1");
    std::vector<double> out(hits.size());
    std::size_t in_window = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        in_window += hits[i];
        if (i >= window) in_window -= hits[i - window];
        const std::size_t width = std::min(i + 1, window);
        out[i] = static_cast<double>(in_window) / static_cast<double>(width);
    }
    return out;
}

inline std::vector<double> rolling_hit_rate(const sim_result& result, std::size_t window) {
    return rolling_hit_rate(std::span<const std::uint8_t>(result.hits), window);
}

} // namespace cachescope

#endif // CACHESCOPE_CACHESIM_HPP
