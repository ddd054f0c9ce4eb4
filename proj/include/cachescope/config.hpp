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

// Experiment configuration: a flat key-value text file ("key = value" per
// line, full-line # comments, integers decimal or 0x hex). A run is fully
// reproducible from its config plus the --seed flag; serialize() emits the
// resolved key set in sorted order.

#ifndef CACHESCOPE_CONFIG_HPP
#define CACHESCOPE_CONFIG_HPP

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cachescope/cachesim.hpp"
#include "cachescope/common.hpp"
#include "cachescope/io.hpp"
#include "cachescope/model.hpp"
#include "cachescope/phases.hpp"
#include "cachescope/streams.hpp"
#include "cachescope/synth.hpp"

namespace cachescope {

class experiment_config {
public:
    static experiment_config parse(std::string_view text) {
        experiment_config cfg;
        std::size_t line_no = 0;
        for (auto line : detail::split_lines(text)) {
            ++line_no;
            auto trimmed = trim(line);
            if (trimmed.empty() || trimmed.front() == '#') continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string_view::npos)
                throw data_error("config line " + std::to_string(line_no) + " is not key = value");
            const std::string key{trim(trimmed.substr(0, eq))};
            const std::string value{trim(trimmed.substr(eq + 1))};
            if (key.empty()) throw data_error("config line " + std::to_string(line_no) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static experiment_config load(const std::string& path) {
        return parse(detail::slurp(path));
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw data_error("config key missing: " + key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_int<std::uint64_t>(it->second, key);
    }

    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_int<std::int64_t>(it->second, key);
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_double(it->second, key);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw data_error("config key " + key + " must be true/false");
    }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

    std::map<std::string, std::string> values_;
};

inline cache_config cache_from_config(const experiment_config& cfg) {
    cache_config c;
    c.total_lines = cfg.get_u64("cache.total_lines", c.total_lines);
    c.associativity = cfg.get_u64("cache.associativity", c.associativity);
    c.line_size = cfg.get_u64("line_size", c.line_size);
    c.validate();
    return c;
}

inline model_config model_from_config(const experiment_config& cfg,
                                      std::optional<std::uint64_t> seed_override = {}) {
    model_config m;
    m.embed_dim = cfg.get_u64("model.embed_dim", m.embed_dim);
    m.hidden_dim = cfg.get_u64("model.hidden_dim", m.hidden_dim);
    m.window = cfg.get_u64("model.window", m.window);
    m.learning_rate = cfg.get_double("model.learning_rate", m.learning_rate);
    m.momentum = cfg.get_double("model.momentum", m.momentum);
    m.epochs = cfg.get_u64("model.epochs", m.epochs);
    m.seed = seed_override.value_or(cfg.get_u64("model.seed", m.seed));
    m.validate();
    return m;
}

inline phase_params phases_from_config(const experiment_config& cfg) {
    phase_params p;
    p.slice_len = cfg.get_u64("phases.slice_len", p.slice_len);
    p.merge_threshold = cfg.get_double("phases.merge_threshold", p.merge_threshold);
    p.cluster_threshold = cfg.get_double("phases.cluster_threshold", p.cluster_threshold);
    p.dpc_weight = cfg.get_double("phases.dpc_weight", p.dpc_weight);
    return p;
}

inline stream_params streams_from_config(const experiment_config& cfg) {
    stream_params s;
    s.min_length = cfg.get_u64("streams.min_length", s.min_length);
    s.max_gap = cfg.get_u64("streams.max_gap", s.max_gap);
    return s;
}

/// Reads synth.seed and synth.segment.N.* keys (N = 0, 1, ... until a gap).
inline synthetic_spec synth_from_config(const experiment_config& cfg,
                                        std::optional<std::uint64_t> seed_override = {}) {
    synthetic_spec spec;
    spec.line_size = cfg.get_u64("line_size", spec.line_size);
    spec.seed = seed_override.value_or(cfg.get_u64("synth.seed", 0));

    for (std::size_t n = 0;; ++n) {
        const std::string base = "synth.segment." + std::to_string(n) + ".";
        if (!cfg.has(base + "duration")) break;
        segment_spec seg;
        seg.duration = cfg.get_u64(base + "duration", 0);
        seg.phase_id = static_cast<std::uint32_t>(cfg.get_u64(base + "phase", n));
        const std::string kind = cfg.get_string(base + "ws.kind", "uniform");
        if (kind == "uniform") seg.working_set.kind = working_set_kind::uniform;
        else if (kind == "cyclic") seg.working_set.kind = working_set_kind::cyclic;
        else throw data_error(base + "ws.kind must be uniform or cyclic");
        seg.working_set.base = cfg.get_u64(base + "ws.base", 0);
        seg.working_set.lines = cfg.get_u64(base + "ws.lines", 64);
        seg.pc.base = cfg.get_u64(base + "pc.base", 0x1000);
        seg.pc.delta = cfg.get_i64(base + "pc.delta", 4);
        seg.pc.period = cfg.get_u64(base + "pc.period", 64);
        seg.stream_every = cfg.get_u64(base + "stream_every", 0);
        seg.require_disjoint = cfg.get_bool(base + "disjoint", false);
        for (std::size_t k = 0;; ++k) {
            const std::string sbase = base + "stream." + std::to_string(k) + ".";
            if (!cfg.has(sbase + "base")) break;
            planted_stream_spec ps;
            ps.base = cfg.get_u64(sbase + "base", 0);
            ps.stride = cfg.get_i64(sbase + "stride", 64);
            ps.length = cfg.get_u64(sbase + "length", 0);
            ps.pc = cfg.get_u64(sbase + "pc", 0);
            seg.streams.push_back(ps);
        }
        spec.segments.push_back(std::move(seg));
    }
    if (spec.segments.empty()) throw data_error("config has no synth.segment.N.duration keys");
    return spec;
}

/// The trace a command operates on: a file when trace.file is set, otherwise
/// the inline synthetic spec.
inline trace resolve_trace(const experiment_config& cfg,
                           std::optional<std::uint64_t> seed_override = {}) {
    const std::uint64_t line_size = cfg.get_u64("line_size", 64);
    if (cfg.has("trace.file")) return load_trace_file(cfg.get_string("trace.file"), line_size);
    return generate_synthetic(synth_from_config(cfg, seed_override)).t;
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    for (auto f : detail::split_fields(csv))
        if (!f.empty()) out.emplace_back(f);
    return out;
}

} // namespace cachescope

#endif // CACHESCOPE_CONFIG_HPP
