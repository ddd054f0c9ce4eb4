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

#ifndef CACHESCOPE_COMMON_HPP
#define CACHESCOPE_COMMON_HPP

#include <charconv>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace cachescope {

/// Bad parameters or preconditions supplied by the caller. CLI exit code 1.
struct usage_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (trace files, sidecars, configs).
/// CLI exit code 2.
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A broken internal contract, e.g. a policy naming a non-resident victim.
/// CLI exit code 3.
struct internal_error : std::logic_error {
    using std::logic_error::logic_error;
};

inline bool is_power_of_two(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

/// FNV-1a, used for content hashes in run manifests. Not cryptographic;
/// only has to make "same bytes" an assertable property.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Shortest round-trip decimal form of a double. All text artifacts go
/// through this so reruns are byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw internal_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

inline std::string to_hex(std::uint64_t v) {
    char buf[19];
    buf[0] = '0';
    buf[1] = 'x';
    auto [ptr, ec] = std::to_chars(buf + 2, buf + sizeof buf, v, 16);
    if (ec != std::errc()) throw internal_error("to_hex: to_chars failed");
    return std::string(buf, ptr);
}

} // namespace cachescope

#endif // CACHESCOPE_COMMON_HPP
