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

#include <gtest/gtest.h>

#include <random>
#include <unordered_map>

#include "cachescope/cachesim.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {
namespace {

trace lines_trace(const std::vector<std::uint64_t>& lines) {
    trace t;
    t.line_size = 64;
    for (std::size_t i = 0; i < lines.size(); ++i)
        t.accesses.push_back({0x100 + 4 * i, lines[i] * 64});
    return t;
}

cache_config fully_associative(std::uint64_t capacity) {
    return cache_config{capacity, capacity, 64};
}

/// Exhaustive/DP oracle for the best possible hit count of any replacement
/// policy on a fully associative cache: states are resident-line bitmasks.
std::size_t optimal_hits(const std::vector<std::uint64_t>& lines, std::size_t capacity) {
    std::vector<std::uint64_t> distinct = lines;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() > 16) throw std::runtime_error("oracle supports <= 16 distinct lines");
    std::unordered_map<std::uint64_t, std::size_t> bit;
    for (std::size_t i = 0; i < distinct.size(); ++i) bit[distinct[i]] = i;

    std::unordered_map<std::uint32_t, std::size_t> best{{0u, 0u}};
    for (std::uint64_t line : lines) {
        const std::uint32_t b = 1u << bit[line];
        std::unordered_map<std::uint32_t, std::size_t> next;
        auto consider = [&](std::uint32_t state, std::size_t hits) {
            auto it = next.find(state);
            if (it == next.end() || it->second < hits) next[state] = hits;
        };
        for (const auto& [state, hits] : best) {
            if (state & b) {
                consider(state, hits + 1);
            } else if (static_cast<std::size_t>(std::popcount(state)) < capacity) {
                consider(state | b, hits);
            } else {
                for (std::size_t v = 0; v < distinct.size(); ++v)
                    if (state & (1u << v)) consider((state & ~(1u << v)) | b, hits);
            }
        }
        best = std::move(next);
    }
    std::size_t out = 0;
    for (const auto& [state, hits] : best) out = std::max(out, hits);
    return out;
}

TEST(Simulate, RepeatedLineHits) {
    const trace t = lines_trace({3, 3, 3});
    lru_policy lru;
    const auto r = simulate(t, fully_associative(4), lru);
    EXPECT_EQ(r.hits, (std::vector<std::uint8_t>{0, 1, 1}));
    EXPECT_DOUBLE_EQ(r.hit_rate, 2.0 / 3.0);
}

TEST(Simulate, FitsInCacheNoEvictions) {
    const trace t = lines_trace({1, 2, 3, 4});
    lru_policy lru;
    const auto r = simulate(t, fully_associative(8), lru);
    EXPECT_EQ(r.hit_count, 0u);
    EXPECT_TRUE(r.evictions.empty());
}

TEST(Simulate, RejectsNonResidentVictim) {
    struct bad_policy final : eviction_policy {
        std::string name() const override { return "bad"; }
        std::uint64_t choose_victim(std::size_t, const memory_access&, std::uint64_t,
                                    std::span<const std::uint64_t>) override {
            return 0xdeadbeef;
        }
    } bad;
    const trace t = lines_trace({1, 2, 3});
    EXPECT_THROW(simulate(t, fully_associative(2), bad), internal_error);
}

TEST(Simulate, LineSizeMismatchRejected) {
    trace t = lines_trace({1, 2});
    cache_config cfg = fully_associative(2);
    cfg.line_size = 128;
    lru_policy lru;
    EXPECT_THROW(simulate(t, cfg, lru), usage_error);
}

TEST(Lru, EvictsOldest) {
    // [A,B,A,C] capacity 2: at C's miss, B is older than A -> evict B.
    const trace t = lines_trace({10, 11, 10, 12});
    lru_policy lru;
    const auto r = simulate(t, fully_associative(2), lru);
    ASSERT_EQ(r.evictions.size(), 1u);
    EXPECT_EQ(r.evictions[0].index, 3u);
    EXPECT_EQ(r.evictions[0].victim, 11u);
}

TEST(Lru, HandComputedHitCount) {
    // [A,B,A,C,B] capacity 2 -> exactly 1 hit (index 2).
    const trace t = lines_trace({1, 2, 1, 3, 2});
    lru_policy lru;
    const auto r = simulate(t, fully_associative(2), lru);
    EXPECT_EQ(r.hit_count, 1u);
    EXPECT_EQ(r.hits[2], 1);
}

TEST(Lru, CyclicPathology) {
    std::vector<std::uint64_t> lines;
    for (int rep = 0; rep < 50; ++rep)
        for (std::uint64_t l : {1, 2, 3}) lines.push_back(l);
    lru_policy lru;
    const auto r = simulate(lines_trace(lines), fully_associative(2), lru);
    EXPECT_EQ(r.hit_count, 0u);
}

TEST(Belady, FiveAccessExample) {
    // [1,2,3,2,1] capacity 2: at 3's miss evict 1 (next use 4 > 3); 1 hit total.
    const trace t = lines_trace({1, 2, 3, 2, 1});
    belady_policy opt(t);
    const auto r = simulate(t, fully_associative(2), opt);
    EXPECT_EQ(r.hit_count, 1u);
    ASSERT_FALSE(r.evictions.empty());
    EXPECT_EQ(r.evictions[0].index, 2u);
    EXPECT_EQ(r.evictions[0].victim, 1u);
    EXPECT_EQ(optimal_hits({1, 2, 3, 2, 1}, 2), 1u);
}

TEST(Belady, EightAccessExample) {
    const std::vector<std::uint64_t> lines = {1, 2, 3, 1, 2, 4, 1, 2}; // A,B,C,A,B,D,A,B
    const trace t = lines_trace(lines);
    belady_policy opt(t);
    const auto r = simulate(t, fully_associative(2), opt);
    EXPECT_EQ(r.hit_count, 2u);
    EXPECT_EQ(optimal_hits(lines, 2), 2u);
}

TEST(Belady, OnlyColdMissesWhenCacheFits) {
    const std::vector<std::uint64_t> lines = {4, 2, 4, 7, 2, 4, 7, 7, 2};
    const trace t = lines_trace(lines);
    belady_policy opt(t);
    const auto r = simulate(t, fully_associative(8), opt);
    EXPECT_EQ(r.hit_count, lines.size() - 3);
}

TEST(Belady, MatchesExhaustiveOptimumOnRandomTraces) {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 40; ++round) {
        std::uniform_int_distribution<std::size_t> len_dist(5, 40);
        std::uniform_int_distribution<std::uint64_t> line_dist(0, 11);
        std::uniform_int_distribution<std::size_t> cap_dist(2, 4);
        std::vector<std::uint64_t> lines(len_dist(rng));
        for (auto& l : lines) l = line_dist(rng);
        const std::size_t cap = cap_dist(rng);

        const trace t = lines_trace(lines);
        belady_policy opt(t);
        const auto r = simulate(t, fully_associative(cap), opt);
        EXPECT_EQ(r.hit_count, optimal_hits(lines, cap)) << "round " << round;
    }
}

TEST(Belady, SetAssociativeMatchesPerSetOptimum) {
    // Each set sees an independent subsequence, so the optimal hit count of
    // the whole cache is the sum of per-set exhaustive optima.
    std::mt19937_64 rng(314);
    for (int round = 0; round < 10; ++round) {
        std::uniform_int_distribution<std::uint64_t> line_dist(0, 23);
        std::vector<std::uint64_t> lines(200);
        for (auto& l : lines) l = line_dist(rng);
        const cache_config cfg{8, 2, 64}; // 4 sets x 2 ways

        const trace t = lines_trace(lines);
        belady_policy opt(t);
        const auto r = simulate(t, cfg, opt);

        std::size_t expected = 0;
        for (std::uint64_t set = 0; set < cfg.num_sets(); ++set) {
            std::vector<std::uint64_t> subsequence;
            for (std::uint64_t l : lines)
                if (l % cfg.num_sets() == set) subsequence.push_back(l);
            if (!subsequence.empty()) expected += optimal_hits(subsequence, cfg.associativity);
        }
        EXPECT_EQ(r.hit_count, expected) << "round " << round;
    }
}

TEST(PhaseFreq, EvictsLeastFrequent) {
    // Phase 0 counts {X: 10, Y: 1}; set {X, Y} full -> evict Y.
    phase_frequency_table table;
    table.counts[{0, 100}] = 10;
    table.counts[{0, 101}] = 1;
    phase_labeling labeling;
    labeling.labels = {0, 0, 0};
    labeling.num_phases = 1;

    const trace t = lines_trace({100, 101, 102});
    phase_freq_policy policy(labeling, table);
    const auto r = simulate(t, fully_associative(2), policy);
    ASSERT_EQ(r.evictions.size(), 1u);
    EXPECT_EQ(r.evictions[0].victim, 101u);
}

TEST(PhaseFreq, ZeroCountTieBreaksToLowestLine) {
    phase_frequency_table empty_table;
    phase_labeling labeling;
    labeling.labels = {0, 0, 0};
    labeling.num_phases = 1;
    const trace t = lines_trace({7, 5, 9});
    phase_freq_policy policy(labeling, empty_table);
    const auto r = simulate(t, fully_associative(2), policy);
    ASSERT_EQ(r.evictions.size(), 1u);
    EXPECT_EQ(r.evictions[0].victim, 5u);
}

TEST(PhaseFreq, LabelingMustCoverTrace) {
    phase_labeling labeling;
    labeling.labels = {0};
    labeling.num_phases = 1;
    const trace t = lines_trace({1, 2, 3});
    phase_freq_policy policy(labeling, {});
    EXPECT_THROW(simulate(t, fully_associative(2), policy), usage_error);
}

TEST(Policies, BeladyDominatesOnRandomTracesAndConfigs) {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 25; ++round) {
        std::uniform_int_distribution<std::size_t> len_dist(40, 300);
        std::uniform_int_distribution<std::uint64_t> line_dist(0, 40);
        std::vector<std::uint64_t> lines(len_dist(rng));
        for (auto& l : lines) l = line_dist(rng);
        const trace t = lines_trace(lines);

        // Alternate fully associative and 2-way set-associative shapes.
        const cache_config cfg = round % 2 == 0 ? fully_associative(4) : cache_config{8, 2, 64};

        belady_policy opt(t);
        lru_policy lru;
        phase_labeling all_zero;
        all_zero.labels.assign(t.size(), 0);
        all_zero.num_phases = 1;
        phase_freq_policy freq(all_zero, build_phase_frequency_table(t, all_zero));

        const auto r_opt = simulate(t, cfg, opt);
        const auto r_lru = simulate(t, cfg, lru);
        const auto r_freq = simulate(t, cfg, freq);
        EXPECT_GE(r_opt.hit_rate, r_lru.hit_rate) << "round " << round;
        EXPECT_GE(r_opt.hit_rate, r_freq.hit_rate) << "round " << round;

        // Conservation and determinism.
        EXPECT_LE(r_opt.evictions.size(), t.size() - r_opt.hit_count);
        belady_policy opt2(t);
        const auto r_opt2 = simulate(t, cfg, opt2);
        EXPECT_EQ(r_opt.hits, r_opt2.hits);
        EXPECT_EQ(r_opt.hit_count, r_opt2.hit_count);
    }
}

TEST(Simulate, ShadowResidencyReplay) {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<std::uint64_t> line_dist(0, 30);
    std::vector<std::uint64_t> lines(500);
    for (auto& l : lines) l = line_dist(rng);
    const trace t = lines_trace(lines);
    const cache_config cfg{8, 4, 64};
    lru_policy lru;
    const auto r = simulate(t, cfg, lru);

    // Replay hits and evictions against independent set bookkeeping.
    std::vector<std::vector<std::uint64_t>> shadow(cfg.num_sets());
    std::size_t ev = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint64_t line = t.line_at(i);
        auto& s = shadow[line % cfg.num_sets()];
        const bool resident = std::find(s.begin(), s.end(), line) != s.end();
        ASSERT_EQ(static_cast<bool>(r.hits[i]), resident) << "index " << i;
        if (!resident) {
            if (s.size() == cfg.associativity) {
                ASSERT_LT(ev, r.evictions.size());
                ASSERT_EQ(r.evictions[ev].index, i);
                auto it = std::find(s.begin(), s.end(), r.evictions[ev].victim);
                ASSERT_NE(it, s.end());
                s.erase(it);
                ++ev;
            }
            s.push_back(line);
        }
    }
    EXPECT_EQ(ev, r.evictions.size());
}

TEST(RollingHitRate, Examples) {
    sim_result r;
    r.hits = {0, 1, 1, 0};
    const auto series = rolling_hit_rate(r, 2);
    ASSERT_EQ(series.size(), 4u);
    EXPECT_DOUBLE_EQ(series[0], 0.0);
    EXPECT_DOUBLE_EQ(series[1], 0.5);
    EXPECT_DOUBLE_EQ(series[2], 1.0);
    EXPECT_DOUBLE_EQ(series[3], 0.5);

    const auto whole = rolling_hit_rate(r, 100);
    EXPECT_DOUBLE_EQ(whole.back(), 0.5); // overall hit rate

    sim_result all_hits;
    all_hits.hits = {1, 1, 1};
    for (double v : rolling_hit_rate(all_hits, 2)) EXPECT_DOUBLE_EQ(v, 1.0);

    EXPECT_THROW(rolling_hit_rate(r, 0), usage_error);
}

TEST(CacheConfig, Validation) {
    EXPECT_NO_THROW(cache_config{}.validate());
    EXPECT_THROW((cache_config{10, 3, 64}).validate(), usage_error);  // not divisible
    EXPECT_THROW((cache_config{24, 4, 64}).validate(), usage_error);  // 6 sets
    EXPECT_THROW((cache_config{16, 4, 100}).validate(), usage_error); // line size
}

} // namespace
} // namespace cachescope
