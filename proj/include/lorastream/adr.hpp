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

#pragma once

#include "lorastream/lora_network.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace lorastream::adr {

struct AdrRecord {
    FrameCounter frame_counter = 0;
    double snr_max = 0.0;
    std::uint32_t gtw_diversity = 0;

    bool operator==(const AdrRecord&) const = default;
};

/// Per-device record of the last 20 frames. "Last" is by frame counter: when
/// full, the lowest counter is evicted and counters older than every retained
/// one are ignored. At most one record per counter, the one with the best SNR.
class AdrTable {
public:
    static constexpr std::size_t kCapacity = 20;

    explicit AdrTable(DeviceId device = 0) : device_(device) {}

    /// No-op for an empty reception list.
    void record_frame(FrameCounter frame_counter, std::span<const double> reception_snrs);

    DeviceId device() const { return device_; }
    std::vector<AdrRecord> records() const;
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::optional<double> max_snr() const;

    /// Rebuilds a table from persisted records. Throws std::invalid_argument
    /// on more than kCapacity records or a repeated counter.
    static AdrTable restore(DeviceId device, const std::vector<AdrRecord>& records);

private:
    DeviceId device_;
    std::map<FrameCounter, AdrRecord> records_;
};

/// Signal-to-noise in hundredths of a dB, for exact arithmetic.
struct CentiDb {
    std::int64_t value = 0;
    auto operator<=>(const CentiDb&) const = default;
};

double snr_margin(double snr_m, double required_snr, double margin_db);
CentiDb snr_margin(CentiDb snr_m, CentiDb required_snr, CentiDb margin_db);

struct DataRateConfig {
    /// Required demodulation SNR per data-rate index; must increase with the index.
    std::vector<double> required_snr_db{-20.0, -17.5, -15.0, -12.5, -10.0, -7.5};
    double margin_db = 10.0;
    double snr_step_db = 3.0;
    int max_power_index = 7;

    int max_rate_index() const { return static_cast<int>(required_snr_db.size()) - 1; }
    /// Throws std::invalid_argument on an inconsistent table.
    void validate() const;
};

struct AdrSuggestion {
    int raise_data_rate_steps = 0;
    int lower_power_steps = 0;

    bool operator==(const AdrSuggestion&) const = default;
};

/// nullopt means NoChange. Margin is taken against the table's best SNR;
/// whole steps go to data rate first, the remainder to transmit power.
std::optional<AdrSuggestion> adr_decision(const AdrTable& table, int current_rate_index, int current_power_index,
                                          const DataRateConfig& config);

}  // namespace lorastream::adr
