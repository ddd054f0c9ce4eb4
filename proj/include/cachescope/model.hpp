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

// The learned eviction model and its imitation training.
//
// Per access the input is the concatenation [e(pc); e(line)] of two learned
// embeddings, fed through a single LSTM layer over a fixed-length history
// window (zero initial state). To score a resident line l:
//
//     key_l   = K e(l)
//     query_t = Q h_t                 logit_{l,t} = key_l . query_t / sqrt(d_h)
//     alpha_l = softmax_t(logit_l)    att_l = sum_t alpha_{l,t} (V h_t)
//     score_l = w . [att_l; key_l] + b
//
// The eviction distribution is a softmax of the scores over the victim
// set's resident lines; the argmax is the victim. Training is behavioral
// cloning: the simulator runs the offline-optimal policy, every eviction
// becomes a supervised example, and Adam (or momentum SGD) minimizes the
// cross-entropy of the model's distribution against the optimal victim.
// Everything is double precision and backpropagation is written out by
// hand, so gradients can be checked against finite differences.

#ifndef CACHESCOPE_MODEL_HPP
#define CACHESCOPE_MODEL_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachescope/cachesim.hpp"
#include "cachescope/common.hpp"
#include "cachescope/mat.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

enum class optimizer_kind { adam, sgd_momentum };

struct model_config {
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 64;
    std::size_t window = 32;
    // Adam by default: momentum SGD settles into the uniform-prediction
    // plateau on eviction cloning and never leaves it.
    optimizer_kind optimizer = optimizer_kind::adam;
    double learning_rate = 0.003;
    double momentum = 0.9; // momentum SGD only
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
    bool allow_oov = true;

    void validate() const {
        if (embed_dim == 0 || hidden_dim == 0 || window == 0 || epochs == 0)
            throw usage_error("model dimensions, window, and epochs must be > 0");
        if (!(learning_rate > 0)) throw usage_error("learning rate must be > 0");
        if (momentum < 0 || momentum >= 1) throw usage_error("momentum must be in [0, 1)");
    }
};

/// All trainable parameters. Embedding tables have one extra final row that
/// serves as the shared out-of-vocabulary slot.
struct model_params {
    matrix embed_addr; // (Va+1) x d_e
    matrix embed_pc;   // (Vp+1) x d_e
    matrix lstm_wx;    // 4 d_h x 2 d_e, gate order [i f g o]
    matrix lstm_wh;    // 4 d_h x d_h
    std::vector<double> lstm_b; // 4 d_h
    matrix attn_key;   // d_h x d_e
    matrix attn_query; // d_h x d_h
    matrix attn_value; // d_h x d_h
    std::vector<double> score_w; // 2 d_h
    std::vector<double> score_b; // 1
};

/// The flat arrays of a parameter set, in a fixed order shared by SGD,
/// serialization, and the gradient check.
inline std::vector<std::vector<double>*> param_arrays(model_params& p) {
    return {&p.embed_addr.data, &p.embed_pc.data, &p.lstm_wx.data, &p.lstm_wh.data,
            &p.lstm_b,          &p.attn_key.data, &p.attn_query.data, &p.attn_value.data,
            &p.score_w,         &p.score_b};
}

inline std::vector<const std::vector<double>*> param_arrays(const model_params& p) {
    return {&p.embed_addr.data, &p.embed_pc.data, &p.lstm_wx.data, &p.lstm_wh.data,
            &p.lstm_b,          &p.attn_key.data, &p.attn_query.data, &p.attn_value.data,
            &p.score_w,         &p.score_b};
}

/// Group label per param_arrays() slot.
inline const std::vector<std::string>& param_group_names() {
    static const std::vector<std::string> names = {
        "embeddings", "embeddings", "lstm",      "lstm",      "lstm",
        "attention",  "attention",  "attention", "scoring",   "scoring"};
    return names;
}

class caching_model {
public:
    model_config cfg;
    std::uint64_t line_size = 64;
    std::vector<std::uint64_t> addr_vocab; // sorted distinct line ids of the training trace
    std::vector<std::uint64_t> pc_vocab;   // sorted distinct pcs
    model_params params;

    std::size_t addr_index(std::uint64_t line) const {
        auto it = addr_map_.find(line);
        if (it != addr_map_.end()) return it->second;
        if (!cfg.allow_oov) throw data_error("line id has no embedding and OOV is disabled");
        return addr_vocab.size();
    }

    std::size_t pc_index(std::uint64_t pc) const {
        auto it = pc_map_.find(pc);
        if (it != pc_map_.end()) return it->second;
        if (!cfg.allow_oov) throw data_error("pc has no embedding and OOV is disabled");
        return pc_vocab.size();
    }

    void rebuild_lookup() {
        addr_map_.clear();
        pc_map_.clear();
        for (std::size_t i = 0; i < addr_vocab.size(); ++i) addr_map_[addr_vocab[i]] = i;
        for (std::size_t i = 0; i < pc_vocab.size(); ++i) pc_map_[pc_vocab[i]] = i;
    }

private:
    std::unordered_map<std::uint64_t, std::size_t> addr_map_;
    std::unordered_map<std::uint64_t, std::size_t> pc_map_;
};

namespace detail {

inline void fill_uniform(matrix& m, double range, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-range, range);
    for (double& v : m.data) v = dist(rng);
}

} // namespace detail

/// Vocabulary from the trace, weights from the seed. The scoring head starts
/// at zero so the untrained model predicts the uniform distribution exactly.
/// The forget-gate bias starts at 1.
inline caching_model make_model(const trace& t, const model_config& cfg) {
    cfg.validate();
    if (t.empty()) throw usage_error("cannot build a model from an empty trace");

    caching_model m;
    m.cfg = cfg;
    m.line_size = t.line_size;
    {
        std::vector<std::uint64_t> lines, pcs;
        lines.reserve(t.size());
        pcs.reserve(t.size());
        for (const auto& a : t.accesses) {
            lines.push_back(line_of(a.address, t.line_size));
            pcs.push_back(a.pc);
        }
        std::sort(lines.begin(), lines.end());
        lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
        std::sort(pcs.begin(), pcs.end());
        pcs.erase(std::unique(pcs.begin(), pcs.end()), pcs.end());
        m.addr_vocab = std::move(lines);
        m.pc_vocab = std::move(pcs);
    }
    m.rebuild_lookup();

    const std::size_t de = cfg.embed_dim, dh = cfg.hidden_dim;
    std::mt19937_64 rng(cfg.seed);
    auto& p = m.params;
    p.embed_addr = matrix(m.addr_vocab.size() + 1, de);
    p.embed_pc = matrix(m.pc_vocab.size() + 1, de);
    p.lstm_wx = matrix(4 * dh, 2 * de);
    p.lstm_wh = matrix(4 * dh, dh);
    p.lstm_b.assign(4 * dh, 0.0);
    p.attn_key = matrix(dh, de);
    p.attn_query = matrix(dh, dh);
    p.attn_value = matrix(dh, dh);
    p.score_w.assign(2 * dh, 0.0);
    p.score_b.assign(1, 0.0);

    std::normal_distribution<double> embed_dist(0.0, 0.1);
    for (double& v : p.embed_addr.data) v = embed_dist(rng);
    for (double& v : p.embed_pc.data) v = embed_dist(rng);
    detail::fill_uniform(p.lstm_wx, 1.0 / std::sqrt(static_cast<double>(2 * de)), rng);
    detail::fill_uniform(p.lstm_wh, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
    for (std::size_t j = dh; j < 2 * dh; ++j) p.lstm_b[j] = 1.0; // forget gate
    detail::fill_uniform(p.attn_key, 1.0 / std::sqrt(static_cast<double>(de)), rng);
    detail::fill_uniform(p.attn_query, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
    detail::fill_uniform(p.attn_value, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
    return m;
}

/// Scores over the victim set's resident lines and the derived softmax.
/// victim_pos is the argmax position; score ties fall to the lowest line id.
struct eviction_scores {
    std::vector<double> scores;
    std::vector<double> distribution;
    std::size_t victim_pos = 0;
};

namespace detail {

/// Everything the backward pass needs, kept per forward call.
struct forward_tape {
    std::size_t steps = 0;
    std::vector<std::pair<std::size_t, std::size_t>> input_rows; // (pc row, addr row) per step
    std::vector<std::size_t> cand_rows;                          // embedding row per candidate
    matrix x;                           // T x 2 d_e
    matrix gi, gf, gg, go, c, h, tc;    // T x d_h each
    matrix query, value;                // T x d_h
    matrix key;                         // C x d_h
    matrix attn;                        // C x T
    matrix attn_out;                    // C x d_h
    eviction_scores out;
};

inline void softmax_inplace(std::span<double> v) {
    double mx = *std::max_element(v.begin(), v.end());
    double sum = 0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

inline void run_forward(const caching_model& m, std::span<const memory_access> window,
                        std::span<const std::uint64_t> residents, forward_tape& tape) {
    if (window.empty()) throw usage_error("forward: empty history window");
    if (residents.empty()) throw usage_error("forward: no resident lines");

    const std::size_t de = m.cfg.embed_dim, dh = m.cfg.hidden_dim;
    const std::size_t T = window.size(), C = residents.size();
    const auto& p = m.params;

    tape.steps = T;
    tape.input_rows.resize(T);
    tape.x = matrix(T, 2 * de);
    for (matrix* m2 : {&tape.gi, &tape.gf, &tape.gg, &tape.go, &tape.c, &tape.h, &tape.tc,
                       &tape.query, &tape.value})
        *m2 = matrix(T, dh);

    std::vector<double> z(4 * dh), zh(4 * dh);
    std::vector<double> h_prev(dh, 0.0), c_prev(dh, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t pc_row = m.pc_index(window[t].pc);
        const std::size_t addr_row = m.addr_index(line_of(window[t].address, m.line_size));
        tape.input_rows[t] = {pc_row, addr_row};
        auto xt = tape.x.row(t);
        std::copy_n(p.embed_pc.row(pc_row).begin(), de, xt.begin());
        std::copy_n(p.embed_addr.row(addr_row).begin(), de, xt.begin() + de);

        matvec(p.lstm_wx, xt, z);
        matvec(p.lstm_wh, h_prev, zh);
        for (std::size_t j = 0; j < 4 * dh; ++j) z[j] += zh[j] + p.lstm_b[j];

        auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        for (std::size_t j = 0; j < dh; ++j) {
            const double i_g = sigmoid(z[j]);
            const double f_g = sigmoid(z[dh + j]);
            const double g_g = std::tanh(z[2 * dh + j]);
            const double o_g = sigmoid(z[3 * dh + j]);
            const double c_t = f_g * c_prev[j] + i_g * g_g;
            const double tc_t = std::tanh(c_t);
            tape.gi(t, j) = i_g;
            tape.gf(t, j) = f_g;
            tape.gg(t, j) = g_g;
            tape.go(t, j) = o_g;
            tape.c(t, j) = c_t;
            tape.tc(t, j) = tc_t;
            tape.h(t, j) = o_g * tc_t;
        }
        h_prev.assign(tape.h.row(t).begin(), tape.h.row(t).end());
        c_prev.assign(tape.c.row(t).begin(), tape.c.row(t).end());

        matvec(p.attn_query, tape.h.row(t), tape.query.row(t));
        matvec(p.attn_value, tape.h.row(t), tape.value.row(t));
    }

    tape.cand_rows.resize(C);
    tape.key = matrix(C, dh);
    tape.attn = matrix(C, T);
    tape.attn_out = matrix(C, dh);
    tape.out.scores.assign(C, 0.0);

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t l = 0; l < C; ++l) {
        tape.cand_rows[l] = m.addr_index(residents[l]);
        matvec(p.attn_key, p.embed_addr.row(tape.cand_rows[l]), tape.key.row(l));
        for (std::size_t t = 0; t < T; ++t)
            tape.attn(l, t) = scale * dot(tape.key.row(l), tape.query.row(t));
        softmax_inplace(tape.attn.row(l));
        for (std::size_t t = 0; t < T; ++t)
            axpy(tape.attn(l, t), tape.value.row(t), tape.attn_out.row(l));
        tape.out.scores[l] = dot({p.score_w.data(), dh}, tape.attn_out.row(l)) +
                             dot({p.score_w.data() + dh, dh}, tape.key.row(l)) + p.score_b[0];
        if (!std::isfinite(tape.out.scores[l])) throw internal_error("non-finite eviction score");
    }

    tape.out.distribution = tape.out.scores;
    softmax_inplace(tape.out.distribution);
    std::size_t best = 0;
    for (std::size_t l = 1; l < C; ++l) {
        if (tape.out.scores[l] > tape.out.scores[best] ||
            (tape.out.scores[l] == tape.out.scores[best] && residents[l] < residents[best]))
            best = l;
    }
    tape.out.victim_pos = best;
}

/// Cross-entropy of the distribution against label_pos, gradients accumulated
/// into `grads` (same shapes as the parameters). Returns the loss.
inline double run_backward(const caching_model& m, const forward_tape& tape,
                           std::size_t label_pos, model_params& grads) {
    const std::size_t de = m.cfg.embed_dim, dh = m.cfg.hidden_dim;
    const std::size_t T = tape.steps, C = tape.cand_rows.size();
    const auto& p = m.params;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const double loss = -std::log(std::max(tape.out.distribution[label_pos], 1e-300));

    std::vector<double> dscore(C);
    for (std::size_t l = 0; l < C; ++l)
        dscore[l] = tape.out.distribution[l] - (l == label_pos ? 1.0 : 0.0);

    matrix dquery(T, dh), dvalue(T, dh), dh_attn(T, dh);
    std::vector<double> dkey(dh), datt(dh), dlogit(T);

    for (std::size_t l = 0; l < C; ++l) {
        for (std::size_t j = 0; j < dh; ++j) {
            datt[j] = dscore[l] * p.score_w[j];
            dkey[j] = dscore[l] * p.score_w[dh + j];
        }
        axpy(dscore[l], tape.attn_out.row(l), {grads.score_w.data(), dh});
        axpy(dscore[l], tape.key.row(l), {grads.score_w.data() + dh, dh});
        grads.score_b[0] += dscore[l];

        // Through att_l = sum_t alpha_t value_t and the softmax over t.
        double weighted = 0;
        for (std::size_t t = 0; t < T; ++t) {
            dlogit[t] = dot(datt, tape.value.row(t)); // d alpha_{l,t}
            weighted += tape.attn(l, t) * dlogit[t];
            axpy(tape.attn(l, t), datt, dvalue.row(t));
        }
        for (std::size_t t = 0; t < T; ++t) {
            dlogit[t] = tape.attn(l, t) * (dlogit[t] - weighted);
            axpy(dlogit[t] * scale, tape.query.row(t), dkey);
            axpy(dlogit[t] * scale, tape.key.row(l), dquery.row(t));
        }

        add_outer(grads.attn_key, 1.0, dkey, p.embed_addr.row(tape.cand_rows[l]));
        matvec_transpose_add(p.attn_key, dkey, grads.embed_addr.row(tape.cand_rows[l]));
    }

    for (std::size_t t = 0; t < T; ++t) {
        add_outer(grads.attn_query, 1.0, dquery.row(t), tape.h.row(t));
        matvec_transpose_add(p.attn_query, dquery.row(t), dh_attn.row(t));
        add_outer(grads.attn_value, 1.0, dvalue.row(t), tape.h.row(t));
        matvec_transpose_add(p.attn_value, dvalue.row(t), dh_attn.row(t));
    }

    // Backpropagation through time.
    std::vector<double> dh_next(dh, 0.0), dc(dh, 0.0), dz(4 * dh), dx(2 * de);
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t j = 0; j < dh; ++j) {
            const double dht = dh_attn(t, j) + dh_next[j];
            const double o_g = tape.go(t, j), tc_t = tape.tc(t, j);
            const double do_g = dht * tc_t;
            dc[j] += dht * o_g * (1.0 - tc_t * tc_t);
            const double i_g = tape.gi(t, j), f_g = tape.gf(t, j), g_g = tape.gg(t, j);
            const double c_prev = t > 0 ? tape.c(t - 1, j) : 0.0;
            const double di = dc[j] * g_g;
            const double df = dc[j] * c_prev;
            const double dg = dc[j] * i_g;
            dz[j] = di * i_g * (1.0 - i_g);
            dz[dh + j] = df * f_g * (1.0 - f_g);
            dz[2 * dh + j] = dg * (1.0 - g_g * g_g);
            dz[3 * dh + j] = do_g * o_g * (1.0 - o_g);
            dc[j] *= f_g; // carried to t-1
        }
        add_outer(grads.lstm_wx, 1.0, dz, tape.x.row(t));
        if (t > 0) add_outer(grads.lstm_wh, 1.0, dz, tape.h.row(t - 1));
        axpy(1.0, dz, grads.lstm_b);

        std::fill(dx.begin(), dx.end(), 0.0);
        matvec_transpose_add(p.lstm_wx, dz, dx);
        auto [pc_row, addr_row] = tape.input_rows[t];
        axpy(1.0, {dx.data(), de}, grads.embed_pc.row(pc_row));
        axpy(1.0, {dx.data() + de, de}, grads.embed_addr.row(addr_row));

        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        matvec_transpose_add(p.lstm_wh, dz, dh_next);
    }
    return loss;
}

inline model_params zero_like(const model_params& p) {
    model_params g;
    g.embed_addr = matrix(p.embed_addr.rows, p.embed_addr.cols);
    g.embed_pc = matrix(p.embed_pc.rows, p.embed_pc.cols);
    g.lstm_wx = matrix(p.lstm_wx.rows, p.lstm_wx.cols);
    g.lstm_wh = matrix(p.lstm_wh.rows, p.lstm_wh.cols);
    g.lstm_b.assign(p.lstm_b.size(), 0.0);
    g.attn_key = matrix(p.attn_key.rows, p.attn_key.cols);
    g.attn_query = matrix(p.attn_query.rows, p.attn_query.cols);
    g.attn_value = matrix(p.attn_value.rows, p.attn_value.cols);
    g.score_w.assign(p.score_w.size(), 0.0);
    g.score_b.assign(1, 0.0);
    return g;
}

} // namespace detail

/// One eviction decision plus the recurrent trajectory over the window.
struct forward_result {
    eviction_scores scores;
    matrix hidden; // T x d_h
    matrix cell;   // T x d_h
    matrix attention; // C x T, per-candidate weights over window positions
};

inline forward_result forward(const caching_model& m, std::span<const memory_access> window,
                              std::span<const std::uint64_t> residents) {
    detail::forward_tape tape;
    detail::run_forward(m, window, residents, tape);
    forward_result r;
    r.scores = tape.out;
    r.hidden = std::move(tape.h);
    r.cell = std::move(tape.c);
    r.attention = std::move(tape.attn);
    return r;
}

/// One supervised decision collected from the optimal policy's rollout.
struct imitation_example {
    std::vector<memory_access> window; // ends at the missing access
    std::vector<std::uint64_t> residents;
    std::size_t victim_pos = 0;
};

inline std::vector<imitation_example> collect_imitation_examples(const trace& t,
                                                                 const cache_config& cache_cfg,
                                                                 std::size_t window) {
    belady_policy expert(t);
    const sim_result sim = simulate(t, cache_cfg, expert);
    std::vector<imitation_example> examples;
    examples.reserve(sim.evictions.size());
    for (const auto& ev : sim.evictions) {
        imitation_example ex;
        const std::size_t begin = ev.index + 1 >= window ? ev.index + 1 - window : 0;
        ex.window.assign(t.accesses.begin() + static_cast<std::ptrdiff_t>(begin),
                         t.accesses.begin() + static_cast<std::ptrdiff_t>(ev.index) + 1);
        ex.residents = ev.candidates;
        const auto it = std::find(ex.residents.begin(), ex.residents.end(), ev.victim);
        ex.victim_pos = static_cast<std::size_t>(it - ex.residents.begin());
        examples.push_back(std::move(ex));
    }
    return examples;
}

/// Loss and full parameter gradients for one example. The training loop uses
/// the same forward/backward pair with buffer reuse.
inline std::pair<double, model_params> example_gradients(const caching_model& m,
                                                         const imitation_example& ex) {
    detail::forward_tape tape;
    detail::run_forward(m, ex.window, ex.residents, tape);
    model_params grads = detail::zero_like(m.params);
    const double loss = detail::run_backward(m, tape, ex.victim_pos, grads);
    return {loss, std::move(grads)};
}

struct training_result {
    caching_model model;
    std::vector<double> loss_curve;     // mean cross-entropy per epoch
    std::vector<double> accuracy_curve; // victim agreement per epoch, pre-update
};

/// Behavioral cloning of the optimal policy on this trace. Deterministic in
/// (trace, configs, seed). Fails if the trace produces no eviction decisions.
inline training_result train_imitation(const trace& t, const cache_config& cache_cfg,
                                       const model_config& cfg) {
    cfg.validate();
    auto examples = collect_imitation_examples(t, cache_cfg, cfg.window);
    if (examples.empty())
        throw usage_error("trace fits in cache: no eviction decisions to imitate");

    training_result result;
    result.model = make_model(t, cfg);
    caching_model& m = result.model;

    model_params grads = detail::zero_like(m.params);
    model_params opt_m = detail::zero_like(m.params); // velocity / first moment
    model_params opt_v = detail::zero_like(m.params); // second moment (Adam)
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    const auto weights = param_arrays(m.params);
    const auto g_arrays = param_arrays(grads);
    const auto m_arrays = param_arrays(opt_m);
    const auto v_arrays = param_arrays(opt_v);
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t step = 0;

    detail::forward_tape tape;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0;
        std::size_t agree = 0;
        for (std::size_t idx : order) {
            const imitation_example& ex = examples[idx];
            detail::run_forward(m, ex.window, ex.residents, tape);
            if (tape.out.victim_pos == ex.victim_pos) ++agree;

            for (auto* g : g_arrays) std::fill(g->begin(), g->end(), 0.0);
            loss_sum += detail::run_backward(m, tape, ex.victim_pos, grads);

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t a = 0; a < weights.size(); ++a) {
                auto& w = *weights[a];
                auto& g = *g_arrays[a];
                auto& m1 = *m_arrays[a];
                auto& v2 = *v_arrays[a];
                if (cfg.optimizer == optimizer_kind::adam) {
                    for (std::size_t i = 0; i < w.size(); ++i) {
                        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                        v2[i] = beta2 * v2[i] + (1.0 - beta2) * g[i] * g[i];
                        w[i] -= cfg.learning_rate * (m1[i] / bc1) /
                                (std::sqrt(v2[i] / bc2) + adam_eps);
                    }
                } else {
                    for (std::size_t i = 0; i < w.size(); ++i) {
                        m1[i] = cfg.momentum * m1[i] - cfg.learning_rate * g[i];
                        w[i] += m1[i];
                    }
                }
            }
        }
        result.loss_curve.push_back(loss_sum / static_cast<double>(examples.size()));
        result.accuracy_curve.push_back(static_cast<double>(agree) /
                                        static_cast<double>(examples.size()));
    }
    return result;
}

/// Record of one model eviction decision taken during a rollout.
struct decision_record {
    std::size_t index = 0;
    std::vector<double> victim_attention; // over window positions, left-padded
};

/// Adapts the model to the simulator's policy interface. Maintains the
/// sliding access-history window across the rollout and recomputes the
/// recurrent trajectory over that window per decision, exactly as during
/// training.
class model_eviction_policy final : public eviction_policy {
public:
    explicit model_eviction_policy(caching_model m) : model_(std::move(m)) {}

    std::string name() const override { return "model"; }
    void reset() override { history_.clear(); }

    void set_recorder(std::vector<decision_record>* recorder) { recorder_ = recorder; }
    const caching_model& model() const { return model_; }

    void observe(std::size_t, const memory_access& access, std::uint64_t, bool) override {
        history_.push_back(access);
    }

    std::uint64_t choose_victim(std::size_t index, const memory_access& incoming, std::uint64_t,
                                std::span<const std::uint64_t> residents) override {
        std::vector<memory_access> window;
        const std::size_t take = std::min(model_.cfg.window - 1, history_.size());
        window.reserve(take + 1);
        window.insert(window.end(), history_.end() - static_cast<std::ptrdiff_t>(take),
                      history_.end());
        window.push_back(incoming);

        const forward_result r = forward(model_, window, residents);
        if (recorder_) {
            decision_record rec;
            rec.index = index;
            rec.victim_attention.assign(model_.cfg.window, 0.0);
            const std::size_t T = window.size();
            for (std::size_t t = 0; t < T; ++t)
                rec.victim_attention[model_.cfg.window - T + t] = r.attention(r.scores.victim_pos, t);
            recorder_->push_back(std::move(rec));
        }
        return residents[r.scores.victim_pos];
    }

private:
    caching_model model_;
    std::vector<memory_access> history_;
    std::vector<decision_record>* recorder_ = nullptr;
};

inline std::unique_ptr<eviction_policy> model_policy(caching_model m) {
    return std::make_unique<model_eviction_policy>(std::move(m));
}

/// Model internals captured over a full rollout: the decision-time hidden
/// state per timestep (window ending at t, zero initial state), per-eviction
/// attention weights, the address embedding table, and the rollout itself.
struct activation_set {
    matrix hidden;                             // T x d_h
    matrix attention;                          // #evictions x window
    std::vector<std::size_t> eviction_indices; // attention row -> trace index
    matrix embeddings;                         // (Va+1) x d_e, last row OOV
    sim_result sim;
};

inline activation_set record_activations(const caching_model& m, const trace& t,
                                         const cache_config& cache_cfg) {
    if (t.empty()) throw usage_error("cannot record activations over an empty trace");

    activation_set rec;
    std::vector<decision_record> decisions;
    model_eviction_policy policy(m);
    policy.set_recorder(&decisions);
    rec.sim = simulate(t, cache_cfg, policy);

    rec.attention = matrix(decisions.size(), m.cfg.window);
    rec.eviction_indices.reserve(decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        rec.eviction_indices.push_back(decisions[i].index);
        std::copy(decisions[i].victim_attention.begin(), decisions[i].victim_attention.end(),
                  rec.attention.row(i).begin());
    }

    rec.hidden = matrix(t.size(), m.cfg.hidden_dim);
    // A lone dummy resident makes forward() usable as a pure encoder here.
    const std::uint64_t dummy_line = t.line_at(0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t begin = i + 1 >= m.cfg.window ? i + 1 - m.cfg.window : 0;
        std::span<const memory_access> window(t.accesses.data() + begin, i - begin + 1);
        const forward_result r = forward(m, window, std::span<const std::uint64_t>(&dummy_line, 1));
        std::copy(r.hidden.row(r.hidden.rows - 1).begin(), r.hidden.row(r.hidden.rows - 1).end(),
                  rec.hidden.row(i).begin());
        if (!all_finite(rec.hidden.row(i))) throw internal_error("non-finite hidden state");
    }

    rec.embeddings = m.params.embed_addr;
    return rec;
}

// ---------------------------------------------------------------------------
// Checkpoint format (version 1, all integers and doubles little-endian):
//   bytes 0..3   magic "CSMD"
//   u32          version
//   u64 x 4      embed_dim, hidden_dim, window, line_size
//   u64 x 2      addr vocab size Va, pc vocab size Vp
//   u64 x Va     address vocabulary (ascending line ids)
//   u64 x Vp     pc vocabulary (ascending)
//   f64 arrays   embed_addr (Va+1 x d_e), embed_pc (Vp+1 x d_e),
//                lstm_wx (4d_h x 2d_e), lstm_wh (4d_h x d_h), lstm_b (4d_h),
//                attn_key (d_h x d_e), attn_query (d_h x d_h),
//                attn_value (d_h x d_h), score_w (2d_h), score_b (1)
// Matrices are row-major. Load then save reproduces the file bit for bit.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct byte_reader {
    std::string_view bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw data_error("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

} // namespace detail

inline std::string serialize_model(const caching_model& m) {
    std::string out = "CSMD";
    detail::put_u32(out, 1);
    detail::put_u64(out, m.cfg.embed_dim);
    detail::put_u64(out, m.cfg.hidden_dim);
    detail::put_u64(out, m.cfg.window);
    detail::put_u64(out, m.line_size);
    detail::put_u64(out, m.addr_vocab.size());
    detail::put_u64(out, m.pc_vocab.size());
    for (std::uint64_t v : m.addr_vocab) detail::put_u64(out, v);
    for (std::uint64_t v : m.pc_vocab) detail::put_u64(out, v);
    for (const auto* arr : param_arrays(m.params))
        for (double v : *arr) detail::put_f64(out, v);
    return out;
}

inline caching_model deserialize_model(std::string_view bytes) {
    detail::byte_reader r{bytes};
    r.need(4);
    if (bytes.substr(0, 4) != "CSMD") throw data_error("not a model checkpoint (bad magic)");
    r.pos = 4;
    if (r.u32() != 1) throw data_error("unsupported checkpoint version");

    caching_model m;
    m.cfg.embed_dim = r.u64();
    m.cfg.hidden_dim = r.u64();
    m.cfg.window = r.u64();
    m.line_size = r.u64();
    const std::uint64_t va = r.u64();
    const std::uint64_t vp = r.u64();
    m.addr_vocab.resize(va);
    for (auto& v : m.addr_vocab) v = r.u64();
    m.pc_vocab.resize(vp);
    for (auto& v : m.pc_vocab) v = r.u64();
    m.rebuild_lookup();

    const std::size_t de = m.cfg.embed_dim, dh = m.cfg.hidden_dim;
    auto& p = m.params;
    p.embed_addr = matrix(va + 1, de);
    p.embed_pc = matrix(vp + 1, de);
    p.lstm_wx = matrix(4 * dh, 2 * de);
    p.lstm_wh = matrix(4 * dh, dh);
    p.lstm_b.assign(4 * dh, 0.0);
    p.attn_key = matrix(dh, de);
    p.attn_query = matrix(dh, dh);
    p.attn_value = matrix(dh, dh);
    p.score_w.assign(2 * dh, 0.0);
    p.score_b.assign(1, 0.0);
    for (auto* arr : param_arrays(p))
        for (double& v : *arr) v = r.f64();
    if (r.pos != bytes.size()) throw data_error("checkpoint has trailing bytes");
    return m;
}

inline void save_model(const std::string& path, const caching_model& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    const std::string bytes = serialize_model(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline caching_model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace cachescope

#endif // CACHESCOPE_MODEL_HPP
