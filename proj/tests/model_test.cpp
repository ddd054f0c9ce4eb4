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

#include <cmath>
#include <map>
#include <random>

#include "cachescope/model.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {
namespace {

trace lines_trace(const std::vector<std::uint64_t>& lines) {
    trace t;
    t.line_size = 64;
    for (std::size_t i = 0; i < lines.size(); ++i)
        t.accesses.push_back({0x100 + 4 * (i % 7), lines[i] * 64});
    return t;
}

trace cyclic_trace(std::uint64_t num_lines, std::size_t length) {
    std::vector<std::uint64_t> lines(length);
    for (std::size_t i = 0; i < length; ++i) lines[i] = 1000 + i % num_lines;
    return lines_trace(lines);
}

model_config tiny_config() {
    model_config cfg;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 8;
    cfg.window = 6;
    cfg.epochs = 1;
    cfg.seed = 3;
    return cfg;
}

TEST(Forward, SingleCandidateIsCertain) {
    const trace t = lines_trace({1, 2, 3, 1, 2, 3});
    const auto m = make_model(t, tiny_config());
    const std::uint64_t resident = t.line_at(0);
    const auto r = forward(m, t.accesses, std::span<const std::uint64_t>(&resident, 1));
    ASSERT_EQ(r.scores.distribution.size(), 1u);
    EXPECT_DOUBLE_EQ(r.scores.distribution[0], 1.0);
    EXPECT_EQ(r.scores.victim_pos, 0u);
}

TEST(Forward, IdenticalEmbeddingsSplitEvenly) {
    const trace t = lines_trace({1, 2, 3, 1, 2, 3});
    auto m = make_model(t, tiny_config());
    const std::size_t row_a = m.addr_index(t.line_at(0));
    const std::size_t row_b = m.addr_index(t.line_at(1));
    for (std::size_t j = 0; j < m.cfg.embed_dim; ++j)
        m.params.embed_addr(row_b, j) = m.params.embed_addr(row_a, j);

    const std::vector<std::uint64_t> residents = {t.line_at(0), t.line_at(1)};
    const auto r = forward(m, t.accesses, residents);
    EXPECT_DOUBLE_EQ(r.scores.scores[0], r.scores.scores[1]);
    EXPECT_NEAR(r.scores.distribution[0], 0.5, 1e-12);
    EXPECT_NEAR(r.scores.distribution[1], 0.5, 1e-12);
}

TEST(Forward, DeterministicAcrossConstructions) {
    const trace t = cyclic_trace(5, 64);
    const auto a = make_model(t, tiny_config());
    const auto b = make_model(t, tiny_config());
    const std::vector<std::uint64_t> residents = {1000, 1001, 1002};
    std::span<const memory_access> window(t.accesses.data(), 6);
    const auto ra = forward(a, window, residents);
    const auto rb = forward(b, window, residents);
    EXPECT_EQ(ra.scores.scores, rb.scores.scores);
    EXPECT_EQ(ra.hidden, rb.hidden);
}

TEST(Forward, UniformInitialLossIsLogCandidates) {
    const trace t = cyclic_trace(6, 48);
    const auto m = make_model(t, tiny_config());
    const std::vector<std::uint64_t> residents = {1000, 1001, 1002, 1003};
    std::span<const memory_access> window(t.accesses.data(), 6);
    const auto r = forward(m, window, residents);
    for (double p : r.scores.distribution) EXPECT_NEAR(p, 0.25, 1e-12);
    EXPECT_NEAR(-std::log(r.scores.distribution[1]), std::log(4.0), 1e-12);
}

TEST(Forward, OovHandling) {
    const trace t = lines_trace({1, 2, 3});
    auto m = make_model(t, tiny_config());
    EXPECT_EQ(m.addr_index(999), m.addr_vocab.size()); // OOV row
    m.cfg.allow_oov = false;
    EXPECT_THROW(m.addr_index(999), data_error);
}

TEST(Forward, EmptyInputsRejected) {
    const trace t = lines_trace({1, 2, 3});
    const auto m = make_model(t, tiny_config());
    const std::vector<std::uint64_t> residents = {1};
    EXPECT_THROW(forward(m, {}, residents), usage_error);
    EXPECT_THROW(forward(m, t.accesses, {}), usage_error);
}

/// Central finite differences over every parameter, compared per group.
TEST(Gradients, MatchFiniteDifferences) {
    const trace t = lines_trace({1, 2, 3, 4, 5, 1, 2, 3, 4, 5});
    caching_model m = make_model(t, tiny_config());

    // Randomize the scoring head too; zero-init would leave the lower groups
    // with exactly zero gradient and prove nothing.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-0.4, 0.4);
    for (double& v : m.params.score_w) v = dist(rng);
    m.params.score_b[0] = dist(rng);

    imitation_example ex;
    ex.window.assign(t.accesses.begin(), t.accesses.begin() + 6);
    ex.residents = {1, 3, 5};
    ex.victim_pos = 2;

    const auto [loss, analytic] = example_gradients(m, ex);
    EXPECT_GT(loss, 0.0);

    auto loss_of = [&](const caching_model& model) {
        const auto r = forward(model, ex.window, ex.residents);
        return -std::log(r.scores.distribution[ex.victim_pos]);
    };

    const double h = 1e-4;
    const auto groups = param_group_names();
    const auto weight_arrays = param_arrays(m.params);
    const auto analytic_arrays = param_arrays(const_cast<const model_params&>(analytic));

    std::map<std::string, std::pair<double, double>> per_group; // (|ga-gn|^2, max norm^2)
    for (std::size_t a = 0; a < weight_arrays.size(); ++a) {
        auto& weights = *weight_arrays[a];
        const auto& ga = *analytic_arrays[a];
        double diff2 = 0, ga2 = 0, gn2 = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double saved = weights[i];
            weights[i] = saved + h;
            const double up = loss_of(m);
            weights[i] = saved - h;
            const double down = loss_of(m);
            weights[i] = saved;
            const double gn = (up - down) / (2 * h);
            diff2 += (ga[i] - gn) * (ga[i] - gn);
            ga2 += ga[i] * ga[i];
            gn2 += gn * gn;
        }
        auto& acc = per_group[groups[a]];
        acc.first += diff2;
        acc.second = std::max({acc.second, ga2, gn2});
    }
    ASSERT_EQ(per_group.size(), 4u); // embeddings, lstm, attention, scoring
    for (const auto& [group, acc] : per_group) {
        ASSERT_GT(acc.second, 0.0) << "group " << group << " has zero gradient";
        const double rel = std::sqrt(acc.first) / std::max(std::sqrt(acc.second), 1e-12);
        EXPECT_LE(rel, 1e-5) << "group " << group;
    }
}

TEST(ModelPolicy, UntrainedModelCompletesSimulation) {
    const trace t = cyclic_trace(9, 200);
    const cache_config cfg{8, 8, 64};
    model_eviction_policy policy(make_model(t, tiny_config()));
    const auto r = simulate(t, cfg, policy);
    EXPECT_EQ(r.hits.size(), t.size());
    EXPECT_LE(r.evictions.size(), t.size() - r.hit_count);
}

TEST(ModelPolicy, ScoreShiftLeavesVictimUnchanged) {
    const trace t = cyclic_trace(6, 60);
    auto m = make_model(t, tiny_config());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (double& v : m.params.score_w) v = dist(rng);

    const std::vector<std::uint64_t> residents = {1000, 1001, 1002, 1003};
    std::span<const memory_access> window(t.accesses.data(), 6);
    const auto before = forward(m, window, residents);
    m.params.score_b[0] += 7.5; // shifts every score equally
    const auto after = forward(m, window, residents);
    EXPECT_EQ(before.scores.victim_pos, after.scores.victim_pos);
    for (std::size_t i = 0; i < residents.size(); ++i)
        EXPECT_NEAR(after.scores.scores[i] - before.scores.scores[i], 7.5, 1e-9);
}

TEST(Training, RejectsTraceThatFitsInCache) {
    const trace t = cyclic_trace(4, 100);
    EXPECT_THROW(train_imitation(t, cache_config{8, 8, 64}, tiny_config()), usage_error);
}

model_config cyclic_train_config() {
    model_config cfg;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 16;
    cfg.window = 12;
    cfg.learning_rate = 0.003;
    cfg.epochs = 30;
    cfg.seed = 2;
    return cfg;
}

TEST(Training, LearnsCyclicEvictionPattern) {
    const trace t = cyclic_trace(9, 1500);
    const cache_config cfg{8, 8, 64};
    const auto result = train_imitation(t, cfg, cyclic_train_config());

    // The expert's decisions on this pattern are all alike; cloning them
    // should reach high agreement and beat LRU's zero hits.
    EXPECT_GT(result.accuracy_curve.back(), 0.9);
    EXPECT_LT(result.loss_curve.back(), result.loss_curve.front());

    belady_policy opt(t);
    const auto r_opt = simulate(t, cfg, opt);
    model_eviction_policy policy(result.model);
    const auto r_model = simulate(t, cfg, policy);
    lru_policy lru;
    const auto r_lru = simulate(t, cfg, lru);

    EXPECT_EQ(r_lru.hit_count, 0u);
    EXPECT_GE(r_model.hit_rate, 0.7 * r_opt.hit_rate);
    EXPECT_GE(r_opt.hit_rate, r_model.hit_rate); // optimality is never beaten
}

TEST(Training, AccuracyTrendIsMonotoneWithTolerance) {
    const trace t = cyclic_trace(9, 1500);
    const auto result = train_imitation(t, cache_config{8, 8, 64}, cyclic_train_config());
    const auto& acc = result.accuracy_curve;
    ASSERT_GE(acc.size(), 2u);
    // Monotone trend: drops beyond noise level on at most 5% of the steps.
    std::size_t violations = 0;
    for (std::size_t i = 0; i + 1 < acc.size(); ++i)
        if (acc[i + 1] < acc[i] - 0.02) ++violations;
    const auto allowed = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(acc.size())));
    EXPECT_LE(violations, std::max<std::size_t>(allowed, 1));
}

TEST(Training, DeterministicInSeed) {
    const trace t = cyclic_trace(9, 400);
    model_config cfg = cyclic_train_config();
    cfg.epochs = 3;
    const auto a = train_imitation(t, cache_config{8, 8, 64}, cfg);
    const auto b = train_imitation(t, cache_config{8, 8, 64}, cfg);
    EXPECT_EQ(a.loss_curve, b.loss_curve);
    EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
}

TEST(RecordActivations, ShapesAndDeterminism) {
    const trace t = cyclic_trace(9, 120);
    const auto m = make_model(t, tiny_config());
    const cache_config cfg{8, 8, 64};
    const auto a = record_activations(m, t, cfg);
    const auto b = record_activations(m, t, cfg);

    EXPECT_EQ(a.hidden.rows, t.size());
    EXPECT_EQ(a.hidden.cols, m.cfg.hidden_dim);
    EXPECT_EQ(a.attention.rows, a.sim.evictions.size());
    EXPECT_EQ(a.attention.cols, m.cfg.window);
    EXPECT_EQ(a.embeddings.rows, m.addr_vocab.size() + 1);
    EXPECT_EQ(a.hidden, b.hidden);
    EXPECT_EQ(a.attention, b.attention);

    // Attention rows are distributions over the window positions seen so far.
    for (std::size_t i = 0; i < a.attention.rows; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < a.attention.cols; ++j) sum += a.attention(i, j);
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const trace t = cyclic_trace(7, 300);
    model_config cfg = cyclic_train_config();
    cfg.epochs = 2;
    const auto trained = train_imitation(t, cache_config{4, 4, 64}, cfg);

    const std::string bytes = serialize_model(trained.model);
    const caching_model loaded = deserialize_model(bytes);
    EXPECT_EQ(serialize_model(loaded), bytes);
    EXPECT_EQ(loaded.addr_vocab, trained.model.addr_vocab);
    EXPECT_EQ(loaded.params.embed_addr, trained.model.params.embed_addr);
    EXPECT_EQ(loaded.line_size, trained.model.line_size);

    // Behavior survives the round trip.
    const std::vector<std::uint64_t> residents = {1000, 1001};
    std::span<const memory_access> window(t.accesses.data(), 8);
    EXPECT_EQ(forward(trained.model, window, residents).scores.scores,
              forward(loaded, window, residents).scores.scores);

    EXPECT_THROW(deserialize_model("XXXX"), data_error);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), data_error);
}

} // namespace
} // namespace cachescope
