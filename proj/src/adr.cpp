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

#include "lorastream/adr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lorastream::adr {

void AdrTable::record_frame(FrameCounter frame_counter, std::span<const double> reception_snrs)
{
    if (reception_snrs.empty()) {
        return;
    }
    const AdrRecord candidate{frame_counter, *std::max_element(reception_snrs.begin(), reception_snrs.end()),
                              static_cast<std::uint32_t>(reception_snrs.size())};

    auto it = records_.find(frame_counter);
    if (it != records_.end()) {
        if (candidate.snr_max > it->second.snr_max) {
            it->second = candidate;
        }
        return;
    }
    if (records_.size() == kCapacity && frame_counter < records_.begin()->first) {
        return;
    }
    records_.emplace(frame_counter, candidate);
    if (records_.size() > kCapacity) {
        records_.erase(records_.begin());
    }
}

std::vector<AdrRecord> AdrTable::records() const
{
    std::vector<AdrRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, record] : records_) {
        out.push_back(record);
    }
    return out;
}

AdrTable AdrTable::restore(DeviceId device, const std::vector<AdrRecord>& records)
{
    if (records.size() > kCapacity) {
        throw std::invalid_argument("AdrTable::restore: too many records");
    }
    AdrTable table(device);
    for (const auto& record : records) {
        if (!table.records_.emplace(record.frame_counter, record).second) {
            throw std::invalid_argument("AdrTable::restore: repeated frame counter");
        }
    }
    return table;
}

std::optional<double> AdrTable::max_snr() const
{
    std::optional<double> best;
    for (const auto& [_, record] : records_) {
        if (!best || record.snr_max > *best) {
            best = record.snr_max;
        }
    }
    return best;
}

double snr_margin(double snr_m, double required_snr, double margin_db)
{
    return snr_m - required_snr - margin_db;
}

CentiDb snr_margin(CentiDb snr_m, CentiDb required_snr, CentiDb margin_db)
{
    return CentiDb{snr_m.value - required_snr.value - margin_db.value};
}

void DataRateConfig::validate() const
{
    if (required_snr_db.empty()) {
        throw std::invalid_argument("data-rate table is empty");
    }
    for (std::size_t i = 1; i < required_snr_db.size(); ++i) {
        if (!(required_snr_db[i] > required_snr_db[i - 1])) {
            throw std::invalid_argument("required SNR must strictly increase with the data-rate index");
        }
    }
    if (!(snr_step_db > 0.0)) {
        throw std::invalid_argument("snr_step_db must be positive");
    }
    if (max_power_index < 0) {
        throw std::invalid_argument("max_power_index must be non-negative");
    }
}

std::optional<AdrSuggestion> adr_decision(const AdrTable& table, int current_rate_index, int current_power_index,
                                          const DataRateConfig& config)
{
    const auto snr_m = table.max_snr();
    if (!snr_m) {
        return std::nullopt;
    }
    if (current_rate_index < 0 || current_rate_index > config.max_rate_index()) {
        throw std::out_of_range("adr_decision: data-rate index outside the configured table");
    }
    const double margin = snr_margin(*snr_m, config.required_snr_db[static_cast<std::size_t>(current_rate_index)],
                                     config.margin_db);
    if (margin <= 0.0) {
        return std::nullopt;
    }
    const int steps = static_cast<int>(std::floor(margin / config.snr_step_db));
    const int rate_steps = std::min(steps, config.max_rate_index() - current_rate_index);
    const int power_steps =
        std::clamp(steps - rate_steps, 0, std::max(0, config.max_power_index - current_power_index));
    if (rate_steps == 0 && power_steps == 0) {
        return std::nullopt;
    }
    return AdrSuggestion{rate_steps, power_steps};
}

}  // namespace lorastream::adr
