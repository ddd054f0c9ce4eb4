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

// File formats. Everything here is plain text (plus the JSON manifest) and
// written through deterministic formatting, so identical runs produce
// identical bytes.
//
//   .phases   one decimal phase id per line, one line per trace index
//   .streams  one stream per line: start_index,end_index,base,stride
//   sim CSV   header "index,pc,address,hit"
//   record    "kind,<kind>" / "rows,<n>" / "cols,<d>" then one CSV row per row
//   PCA CSV   header "component,timestep,value" (projections, long format)
//   corr CSV  header "component,phase,r", missing r written as NA

#ifndef CACHESCOPE_IO_HPP
#define CACHESCOPE_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cachescope/cachesim.hpp"
#include "cachescope/common.hpp"
#include "cachescope/phases.hpp"
#include "cachescope/probe.hpp"
#include "cachescope/streams.hpp"
#include "cachescope/trace.hpp"

namespace cachescope {

namespace detail {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(sep, pos);
        if (c == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
    return fields;
}

template <class T>
T parse_int(std::string_view s, const std::string& what) {
    T v{};
    int base = 10;
    std::string_view digits = s;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        digits = s.substr(2);
    }
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
        throw data_error("cannot parse " + what + ": \"" + std::string(s) + "\"");
    return v;
}

inline double parse_double(std::string_view s, const std::string& what) {
    double v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw data_error("cannot parse " + what + ": \"" + std::string(s) + "\"");
    return v;
}

} // namespace detail

// --- phase sidecar ---------------------------------------------------------

inline std::string serialize_phases(const phase_labeling& labeling) {
    std::string out;
    for (std::uint32_t v : labeling.labels) {
        out += std::to_string(v);
        out += '\n';
    }
    return out;
}

inline phase_labeling parse_phases(std::string_view text) {
    phase_labeling labeling;
    for (auto line : detail::split_lines(text))
        labeling.labels.push_back(detail::parse_int<std::uint32_t>(line, "phase id"));
    if (labeling.labels.empty()) throw data_error("empty phase sidecar");
    std::uint32_t mx = 0;
    for (std::uint32_t v : labeling.labels) mx = std::max(mx, v);
    std::vector<bool> seen(mx + 1, false);
    for (std::uint32_t v : labeling.labels) seen[v] = true;
    for (std::size_t p = 0; p <= mx; ++p)
        if (!seen[p]) throw data_error("phase ids are not contiguous from 0");
    labeling.num_phases = mx + 1;
    return labeling;
}

inline void write_phases_file(const std::string& path, const phase_labeling& labeling) {
    detail::spit(path, serialize_phases(labeling));
}

inline phase_labeling load_phases_file(const std::string& path) {
    return parse_phases(detail::slurp(path));
}

// --- stream sidecar --------------------------------------------------------

/// What the sidecar preserves about a stream. Member indices are not stored;
/// consumers re-detect and select by (base, stride).
struct stream_summary {
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    std::uint64_t base = 0;
    std::int64_t stride = 0;
};

inline std::string serialize_streams(const std::vector<stream>& streams) {
    std::string out;
    for (const auto& s : streams) {
        out += std::to_string(s.span_begin());
        out += ',';
        out += std::to_string(s.span_end());
        out += ',';
        out += to_hex(s.base);
        out += ',';
        out += std::to_string(s.stride);
        out += '\n';
    }
    return out;
}

inline std::vector<stream_summary> parse_streams(std::string_view text) {
    std::vector<stream_summary> out;
    for (auto line : detail::split_lines(text)) {
        auto f = detail::split_fields(line);
        if (f.size() != 4) throw data_error("stream sidecar line needs 4 fields");
        stream_summary s;
        s.start_index = detail::parse_int<std::size_t>(f[0], "stream start");
        s.end_index = detail::parse_int<std::size_t>(f[1], "stream end");
        s.base = detail::parse_int<std::uint64_t>(f[2], "stream base");
        s.stride = detail::parse_int<std::int64_t>(f[3], "stream stride");
        out.push_back(s);
    }
    return out;
}

inline void write_streams_file(const std::string& path, const std::vector<stream>& streams) {
    detail::spit(path, serialize_streams(streams));
}

inline std::vector<stream_summary> load_streams_file(const std::string& path) {
    return parse_streams(detail::slurp(path));
}

// --- simulation CSV --------------------------------------------------------

inline std::string serialize_sim_csv(const trace& t, const sim_result& sim) {
    if (sim.hits.size() != t.size()) throw usage_error("sim result does not match trace");
    std::string out = "index,pc,address,hit\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += to_hex(t.accesses[i].pc);
        out += ',';
        out += to_hex(t.accesses[i].address);
        out += ',';
        out += sim.hits[i] ? '1' : '0';
        out += '\n';
    }
    return out;
}

struct sim_csv {
    std::vector<std::uint64_t> pc;
    std::vector<std::uint64_t> address;
    std::vector<std::uint8_t> hit;
};

inline sim_csv parse_sim_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || lines[0] != "index,pc,address,hit")
        throw data_error("simulation CSV must start with \"index,pc,address,hit\"");
    sim_csv out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = detail::split_fields(lines[i]);
        if (f.size() != 4) throw data_error("simulation CSV row needs 4 columns");
        out.pc.push_back(detail::parse_int<std::uint64_t>(f[1], "pc"));
        out.address.push_back(detail::parse_int<std::uint64_t>(f[2], "address"));
        out.hit.push_back(detail::parse_int<int>(f[3], "hit flag") ? 1 : 0);
    }
    if (out.pc.empty()) throw data_error("simulation CSV has no rows");
    return out;
}

inline sim_csv load_sim_csv(const std::string& path) { return parse_sim_csv(detail::slurp(path)); }

// --- activation record -----------------------------------------------------

inline std::string serialize_record(const activation_record& rec) {
    std::string out = "kind," + to_string(rec.kind) + "\n";
    out += "rows," + std::to_string(rec.data.rows) + "\n";
    out += "cols," + std::to_string(rec.data.cols) + "\n";
    for (std::size_t i = 0; i < rec.data.rows; ++i) {
        for (std::size_t j = 0; j < rec.data.cols; ++j) {
            if (j) out += ',';
            out += format_double(rec.data(i, j));
        }
        out += '\n';
    }
    return out;
}

inline activation_record parse_record(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.size() < 3) throw data_error("activation record is truncated");
    auto header = [&](std::size_t i, std::string_view key) {
        auto f = detail::split_fields(lines[i]);
        if (f.size() != 2 || f[0] != key)
            throw data_error("activation record: expected \"" + std::string(key) + ",...\"");
        return std::string(f[1]);
    };
    activation_record rec;
    rec.kind = record_kind_from_string(header(0, "kind"));
    const auto rows = detail::parse_int<std::size_t>(header(1, "rows"), "rows");
    const auto cols = detail::parse_int<std::size_t>(header(2, "cols"), "cols");
    if (lines.size() != 3 + rows) throw data_error("activation record row count mismatch");
    rec.data = matrix(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto f = detail::split_fields(lines[3 + i]);
        if (f.size() != cols) throw data_error("activation record column count mismatch");
        for (std::size_t j = 0; j < cols; ++j)
            rec.data(i, j) = detail::parse_double(f[j], "record value");
    }
    return rec;
}

inline void write_record_file(const std::string& path, const activation_record& rec) {
    detail::spit(path, serialize_record(rec));
}

inline activation_record load_record_file(const std::string& path) {
    return parse_record(detail::slurp(path));
}

// --- PCA and correlation CSVs ----------------------------------------------

inline std::string serialize_pca_csv(const pca_result& r) {
    std::string out = "component,timestep,value\n";
    for (std::size_t c = 0; c < r.projections.cols; ++c)
        for (std::size_t i = 0; i < r.projections.rows; ++i) {
            out += std::to_string(c);
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += format_double(r.projections(i, c));
            out += '\n';
        }
    return out;
}

/// Projections from a PCA CSV, timesteps x components.
inline matrix parse_pca_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || lines[0] != "component,timestep,value")
        throw data_error("PCA CSV must start with \"component,timestep,value\"");
    std::size_t max_c = 0, max_t = 0;
    struct cell {
        std::size_t c, t;
        double v;
    };
    std::vector<cell> cells;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = detail::split_fields(lines[i]);
        if (f.size() != 3) throw data_error("PCA CSV row needs 3 columns");
        cell x{detail::parse_int<std::size_t>(f[0], "component"),
               detail::parse_int<std::size_t>(f[1], "timestep"),
               detail::parse_double(f[2], "value")};
        max_c = std::max(max_c, x.c);
        max_t = std::max(max_t, x.t);
        cells.push_back(x);
    }
    if (cells.empty()) throw data_error("PCA CSV has no rows");
    matrix m(max_t + 1, max_c + 1);
    for (const auto& x : cells) m(x.t, x.c) = x.v;
    return m;
}

inline std::string serialize_correlation_csv(const correlation_report& report) {
    std::string out = "component,phase,r\n";
    for (std::size_t c = 0; c < report.num_components; ++c)
        for (std::uint32_t p = 0; p < report.num_phases; ++p) {
            out += std::to_string(c);
            out += ',';
            out += std::to_string(p);
            out += ',';
            const auto r = report.at(c, p);
            out += r ? format_double(*r) : "NA";
            out += '\n';
        }
    return out;
}

// --- index map (one signed integer per old index, -1 = deleted) -------------

inline std::string serialize_index_map(const std::vector<std::ptrdiff_t>& map) {
    std::string out;
    for (std::ptrdiff_t v : map) {
        out += std::to_string(v);
        out += '\n';
    }
    return out;
}

inline std::vector<std::ptrdiff_t> parse_index_map(std::string_view text) {
    std::vector<std::ptrdiff_t> map;
    for (auto line : detail::split_lines(text))
        map.push_back(detail::parse_int<std::ptrdiff_t>(line, "index map entry"));
    if (map.empty()) throw data_error("empty index map");
    return map;
}

inline void write_index_map_file(const std::string& path, const std::vector<std::ptrdiff_t>& map) {
    detail::spit(path, serialize_index_map(map));
}

inline std::vector<std::ptrdiff_t> load_index_map_file(const std::string& path) {
    return parse_index_map(detail::slurp(path));
}

// --- plain text files --------------------------------------------------------

inline void write_text_file(const std::string& path, std::string_view bytes) {
    detail::spit(path, bytes);
}

inline std::string read_text_file(const std::string& path) { return detail::slurp(path); }

// --- run manifest ----------------------------------------------------------

inline std::string hash_file_hex(const std::string& path) {
    return to_hex(fnv1a(detail::slurp(path)));
}

/// Machine-readable description of one command run: resolved parameters and
/// FNV-1a content hashes of every input and output. Reruns with the same
/// config must reproduce the same manifest bit for bit, so no timestamps.
struct run_manifest {
    std::string command;
    std::map<std::string, std::string> parameters;
    std::map<std::string, std::string> input_hashes;
    std::map<std::string, std::string> output_hashes;

    // Keys are bare filenames so manifests do not depend on where a run
    // lives; same-named files from different directories (e.g. the two
    // records of a compare) get a deterministic #N suffix.
    void add_input(const std::string& path) { add(input_hashes, path); }
    void add_output(const std::string& path) { add(output_hashes, path); }

    std::string serialize() const {
        nlohmann::json j;
        j["command"] = command;
        j["parameters"] = parameters;
        j["inputs"] = input_hashes;
        j["outputs"] = output_hashes;
        return j.dump(2) + "\n";
    }

private:
    static void add(std::map<std::string, std::string>& into, const std::string& path) {
        const std::string name = std::filesystem::path(path).filename().string();
        std::string key = name;
        for (int n = 2; into.contains(key); ++n) key = name + "#" + std::to_string(n);
        into[key] = hash_file_hex(path);
    }
};

inline void write_manifest(const std::string& path, const run_manifest& m) {
    detail::spit(path, m.serialize());
}

} // namespace cachescope

#endif // CACHESCOPE_IO_HPP
