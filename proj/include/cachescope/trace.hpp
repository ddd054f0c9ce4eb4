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

#ifndef CACHESCOPE_TRACE_HPP
#define CACHESCOPE_TRACE_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cachescope/common.hpp"

namespace cachescope {

/// One memory access: the program counter of the issuing instruction and the
/// (un-aligned) byte address it touched. Position in the trace is the index
/// into trace::accesses; it is never stored.
struct memory_access {
    std::uint64_t pc = 0;
    std::uint64_t address = 0;

    friend bool operator==(const memory_access&, const memory_access&) = default;
};

/// Cache-line id of a byte address: floor(address / line_size).
/// line_size must be a power of two.
inline std::uint64_t line_of(std::uint64_t address, std::uint64_t line_size) {
    if (!is_power_of_two(line_size)) throw usage_error("line_size must be a power of two");
    return address / line_size;
}

/// An ordered access sequence. Immutable after construction by convention:
/// every analysis in this library takes `const trace&` and edits produce new
/// traces, so sharing one trace across concurrent analyses is safe.
struct trace {
    std::vector<memory_access> accesses;
    std::uint64_t line_size = 64;

    std::size_t size() const { return accesses.size(); }
    bool empty() const { return accesses.empty(); }
    std::uint64_t line_at(std::size_t i) const { return line_of(accesses[i].address, line_size); }

    friend bool operator==(const trace&, const trace&) = default;
};

constexpr std::uint64_t reuse_infinite = std::numeric_limits<std::uint64_t>::max();

/// Forward reuse distances at cache-line granularity: distances[i] is the
/// number of accesses until the line touched at i is touched again, or
/// reuse_infinite if it never is. distances[i] >= 1 when finite.
struct reuse_profile {
    std::vector<std::uint64_t> distances;
};

/// Single backward pass; the last access to each line gets reuse_infinite.
inline reuse_profile compute_reuse_profile(const trace& t) {
    if (t.empty()) throw usage_error("reuse profile of an empty trace");
    reuse_profile profile;
    profile.distances.assign(t.size(), reuse_infinite);
    std::unordered_map<std::uint64_t, std::size_t> next_seen;
    next_seen.reserve(t.size());
    for (std::size_t i = t.size(); i-- > 0;) {
        const std::uint64_t line = t.line_at(i);
        auto it = next_seen.find(line);
        if (it != next_seen.end()) profile.distances[i] = it->second - i;
        next_seen[line] = i;
    }
    return profile;
}

namespace detail {

inline bool parse_hex_u64(std::string_view field, std::uint64_t& out) {
    if (field.size() < 3 || field[0] != '0' || (field[1] != 'x' && field[1] != 'X')) return false;
    const char* first = field.data() + 2;
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out, 16);
    return ec == std::errc() && ptr == last;
}

} // namespace detail

// Trace file format (canonical): UTF-8 text, first line exactly "pc,address",
// then one record per line, two 0x-prefixed hex integers, comma, no spaces.
// Record order is program order.

inline trace parse_trace(std::string_view text, std::uint64_t line_size) {
    if (!is_power_of_two(line_size)) throw usage_error("line_size must be a power of two");
    trace t;
    t.line_size = line_size;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (line_no == 1) {
            if (line != "pc,address")
                throw data_error("trace header must be \"pc,address\", got \"" + std::string(line) + "\"");
            saw_header = true;
            continue;
        }
        if (line.empty()) continue; // tolerate a trailing blank line
        std::size_t comma = line.find(',');
        memory_access a;
        if (comma == std::string_view::npos || !detail::parse_hex_u64(line.substr(0, comma), a.pc) ||
            !detail::parse_hex_u64(line.substr(comma + 1), a.address))
            throw data_error("malformed trace record " + std::to_string(line_no - 1) + " (line " +
                             std::to_string(line_no) + ")");
        t.accesses.push_back(a);
    }
    if (!saw_header) throw data_error("empty trace file (missing header)");
    if (t.empty()) throw data_error("empty trace");
    return t;
}

inline std::string serialize_trace(const trace& t) {
    std::string out = "pc,address\n";
    for (const auto& a : t.accesses) {
        out += to_hex(a.pc);
        out += ',';
        out += to_hex(a.address);
        out += '\n';
    }
    return out;
}

inline trace load_trace_file(const std::string& path, std::uint64_t line_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open trace file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str(), line_size);
}

inline void write_trace_file(const std::string& path, const trace& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write trace file: " + path);
    out << serialize_trace(t);
}

} // namespace cachescope

#endif // CACHESCOPE_TRACE_HPP
