/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/


// Brute-force reference implementations. None of these call into the
// library code they are used to check.

#pragma once

#include "lorastream/adr.hpp"
#include "lorastream/windowing.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using lorastream::FrameCounter;

struct Insertion {
    FrameCounter counter = 0;
    std::vector<double> snrs;
};

/// Per counter the first insertion reaching the best SNR, then the twenty
/// highest counters. Empty insertions never happened.
inline std::vector<lorastream::adr::AdrRecord> adr_table(const std::vector<Insertion>& insertions)
{
    std::map<FrameCounter, lorastream::adr::AdrRecord> best;
    for (const auto& ins : insertions) {
        if (ins.snrs.empty()) {
            continue;
        }
        double snr_max = ins.snrs[0];
        for (double s : ins.snrs) {
            if (s > snr_max) {
                snr_max = s;
            }
        }
        auto it = best.find(ins.counter);
        if (it == best.end() || snr_max > it->second.snr_max) {
            best[ins.counter] = {ins.counter, snr_max, static_cast<std::uint32_t>(ins.snrs.size())};
        }
    }
    std::vector<lorastream::adr::AdrRecord> all;
    for (const auto& [_, r] : best) {
        all.push_back(r);
    }
    if (all.size() > 20) {
        all.erase(all.begin(), all.end() - 20);
    }
    return all;
}

inline std::int64_t transmission_ms(std::int64_t size, std::int64_t rate)
{
    std::int64_t t = 0;
    while (t * rate < 1000 * size) {
        ++t;
    }
    return t;
}

/// Smallest positive multiple of a that b divides, found by stepping.
inline std::int64_t lcm_by_search(std::int64_t a, std::int64_t b)
{
    std::int64_t m = a;
    while (m % b != 0) {
        m += a;
    }
    return m;
}

/// Weighted mean of window sizes with breached windows weighted zero,
/// evaluated in floating point.
inline std::optional<double> moving_average(const std::vector<lorastream::windowing::WindowRecord>& history,
                                            std::uint64_t late_threshold)
{
    double num = 0.0;
    double den = 0.0;
    for (const auto& r : history) {
        const double z = r.late_entries > late_threshold ? 0.0 : 1.0;
        num += z * static_cast<double>(r.messages) * static_cast<double>(r.size);
        den += z * static_cast<double>(r.messages);
    }
    if (den == 0.0) {
        return std::nullopt;
    }
    return num / den;
}

inline std::set<FrameCounter> set_difference(const std::set<FrameCounter>& secondaries_union,
                                             const std::set<FrameCounter>& primary)
{
    std::set<FrameCounter> out;
    for (auto c : secondaries_union) {
        if (!primary.contains(c)) {
            out.insert(c);
        }
    }
    return out;
}

}  // namespace oracle
