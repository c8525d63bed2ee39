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

#include "lorastream/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lorastream {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message)
{
    throw ScenarioError(path + ": " + message);
}

/// A JSON node plus the field path that reached it, for error messages.
class Node {
public:
    Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return value_; }
    bool has(const char* key) const { return value_.is_object() && value_.contains(key); }

    Node at(const char* key) const
    {
        if (!has(key)) {
            fail(path_, std::string("missing field '") + key + "'");
        }
        return Node(value_.at(key), child_path(key));
    }
    std::optional<Node> maybe(const char* key) const
    {
        if (!has(key) || value_.at(key).is_null()) {
            return std::nullopt;
        }
        return Node(value_.at(key), child_path(key));
    }

    std::vector<Node> items() const
    {
        if (!value_.is_array()) {
            fail(path_, "expected an array");
        }
        std::vector<Node> out;
        for (std::size_t i = 0; i < value_.size(); ++i) {
            out.emplace_back(value_[i], path_ + "[" + std::to_string(i) + "]");
        }
        return out;
    }

    std::int64_t as_int() const
    {
        if (!value_.is_number_integer()) {
            fail(path_, "expected an integer");
        }
        return value_.get<std::int64_t>();
    }
    std::uint64_t as_uint() const
    {
        const auto v = as_int();
        if (v < 0) {
            fail(path_, "must be non-negative");
        }
        return static_cast<std::uint64_t>(v);
    }
    double as_double() const
    {
        if (!value_.is_number()) {
            fail(path_, "expected a number");
        }
        return value_.get<double>();
    }
    bool as_bool() const
    {
        if (!value_.is_boolean()) {
            fail(path_, "expected a boolean");
        }
        return value_.get<bool>();
    }
    std::string as_string() const
    {
        if (!value_.is_string()) {
            fail(path_, "expected a string");
        }
        return value_.get<std::string>();
    }
    Position as_position() const
    {
        if (!value_.is_array() || value_.size() != 2 || !value_[0].is_number() || !value_[1].is_number()) {
            fail(path_, "expected [x, y]");
        }
        return Position{value_[0].get<double>(), value_[1].get<double>()};
    }

    std::int64_t int_or(const char* key, std::int64_t fallback) const { return has(key) ? at(key).as_int() : fallback; }
    double double_or(const char* key, double fallback) const { return has(key) ? at(key).as_double() : fallback; }

private:
    std::string child_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& value_;
    std::string path_;
};

std::uint32_t as_id(const Node& node)
{
    const auto v = node.as_int();
    if (v < 0 || v > static_cast<std::int64_t>(UINT32_MAX)) {
        fail(node.path(), "id out of range");
    }
    return static_cast<std::uint32_t>(v);
}

DeviceClass parse_class(const Node& node)
{
    const auto s = node.as_string();
    if (s == "A") {
        return DeviceClass::A;
    }
    if (s == "B") {
        return DeviceClass::B;
    }
    if (s == "C") {
        return DeviceClass::C;
    }
    fail(node.path(), "device class must be A, B or C");
}

SnrParams parse_snr(const Node& node, SnrParams base)
{
    base.snr_at_ref_db = node.double_or("snr_at_ref_db", base.snr_at_ref_db);
    base.ref_distance_m = node.double_or("ref_distance_m", base.ref_distance_m);
    base.path_loss_exponent = node.double_or("path_loss_exponent", base.path_loss_exponent);
    base.noise_sigma_db = node.double_or("noise_sigma_db", base.noise_sigma_db);
    return base;
}

LinkParams parse_link(const Node& node, LinkParams base)
{
    base.drop_probability = node.double_or("drop_probability", base.drop_probability);
    base.delay_ms = node.int_or("delay_ms", base.delay_ms);
    if (auto snr = node.maybe("snr")) {
        base.snr = parse_snr(*snr, base.snr);
    }
    return base;
}

void check_probability(double p, const std::string& path)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(path, "probability must lie in [0, 1]");
    }
}

void check_interval(VirtualTime from, VirtualTime to, const std::string& path)
{
    if (from.ticks < 0 || to <= from) {
        fail(path, "interval must satisfy 0 <= from_ms < to_ms");
    }
}

Scenario parse(const json& doc)
{
    const Node root(doc, "");
    if (!doc.is_object()) {
        fail("<root>", "expected an object");
    }
    Scenario s;
    if (root.has("seed")) {
        s.seed = root.at("seed").as_uint();
    }
    s.duration_ms = root.at("duration_ms").as_int();

    if (auto rx = root.maybe("receive_windows")) {
        s.receive_windows.rx1_offset_ms = rx->int_or("rx1_offset_ms", s.receive_windows.rx1_offset_ms);
        s.receive_windows.rx2_offset_ms = rx->int_or("rx2_offset_ms", s.receive_windows.rx2_offset_ms);
        s.receive_windows.rx_width_ms = rx->int_or("rx_width_ms", s.receive_windows.rx_width_ms);
        s.receive_windows.class_b_period_ms = rx->int_or("class_b_period_ms", s.receive_windows.class_b_period_ms);
    }

    for (const auto& g : root.at("gateways").items()) {
        s.gateways.push_back(GatewaySpec{as_id(g.at("id")), g.at("position").as_position()});
    }
    for (const auto& d : root.at("devices").items()) {
        DeviceSpec spec;
        spec.id = as_id(d.at("id"));
        spec.device_class = parse_class(d.at("class"));
        spec.position = d.at("position").as_position();
        spec.data_rate = d.int_or("data_rate", spec.data_rate);
        spec.message_size = d.int_or("message_size", spec.message_size);
        spec.stream = static_cast<int>(d.at("stream").as_int());
        spec.key = d.at("key").as_string();
        if (auto kind = d.maybe("entity_kind")) {
            const auto k = kind->as_string();
            if (k == "base") {
                spec.entity_kind = EntityKind::BaseEntity;
            }
            else if (k == "business") {
                spec.entity_kind = EntityKind::BusinessObject;
            }
            else {
                fail(kind->path(), "entity_kind must be 'base' or 'business'");
            }
        }
        spec.send_period_ms = d.int_or("send_period_ms", spec.send_period_ms);
        spec.send_offset_ms = d.int_or("send_offset_ms", spec.send_offset_ms);
        s.devices.push_back(std::move(spec));
    }

    if (auto defaults = root.maybe("link_defaults")) {
        s.link_defaults = parse_link(*defaults, s.link_defaults);
    }
    if (auto links = root.maybe("links")) {
        for (const auto& l : links->items()) {
            LinkSpec spec;
            spec.device = as_id(l.at("device"));
            spec.gateway = as_id(l.at("gateway"));
            spec.params = parse_link(l, s.link_defaults);
            s.links.push_back(spec);
        }
    }

    for (const auto& q : root.at("quorums").items()) {
        recovery::QuorumAssignment quorum;
        quorum.node = as_id(q.at("node"));
        for (const auto& g : q.at("gateways").items()) {
            quorum.gateways.push_back(as_id(g));
        }
        s.quorums.push_back(std::move(quorum));
    }

    if (auto w = root.maybe("window")) {
        s.window.desired_latency_ms = w->int_or("desired_latency_ms", s.window.desired_latency_ms);
        s.window.window_factor = w->double_or("window_factor", s.window.window_factor);
        if (w->has("late_threshold")) {
            s.window.late_threshold = w->at("late_threshold").as_uint();
        }
        if (w->has("history_len")) {
            s.window.history_len = w->at("history_len").as_uint();
        }
        if (auto f = w->maybe("fallback")) {
            const auto v = f->as_string();
            if (v == "last_known_good_first") {
                s.window.fallback = windowing::FallbackOrder::LastKnownGoodFirst;
            }
            else if (v == "moving_average_first") {
                s.window.fallback = windowing::FallbackOrder::MovingAverageFirst;
            }
            else {
                fail(f->path(), "fallback must be 'last_known_good_first' or 'moving_average_first'");
            }
        }
        s.window.min_size_ms = w->int_or("min_size_ms", s.window.min_size_ms);
        if (auto stat = w->maybe("latency_statistic")) {
            const auto v = stat->as_string();
            if (v == "mean") {
                s.window.latency_statistic = windowing::LatencyStatistic::Mean;
            }
            else if (v == "p95") {
                s.window.latency_statistic = windowing::LatencyStatistic::P95;
            }
            else {
                fail(stat->path(), "latency_statistic must be 'mean' or 'p95'");
            }
        }
        s.watermark_delay_ms = w->int_or("watermark_delay_ms", s.watermark_delay_ms);
        if (auto b = w->maybe("bcw_devices")) {
            const auto ids = b->items();
            if (ids.size() != 2) {
                fail(b->path(), "expected exactly two device ids");
            }
            s.bcw_devices = std::make_pair(as_id(ids[0]), as_id(ids[1]));
        }
    }

    if (auto dr = root.maybe("data_rates")) {
        if (auto req = dr->maybe("required_snr_db")) {
            s.data_rates.required_snr_db.clear();
            for (const auto& v : req->items()) {
                s.data_rates.required_snr_db.push_back(v.as_double());
            }
        }
        s.data_rates.margin_db = dr->double_or("margin_db", s.data_rates.margin_db);
        s.data_rates.snr_step_db = dr->double_or("snr_step_db", s.data_rates.snr_step_db);
        s.data_rates.max_power_index = static_cast<int>(dr->int_or("max_power_index", s.data_rates.max_power_index));
        s.initial_rate_index = static_cast<int>(dr->int_or("initial_rate_index", s.initial_rate_index));
    }

    s.firing_threshold_m = root.double_or("firing_threshold_m", s.firing_threshold_m);
    if (auto shards = root.maybe("shards")) {
        for (const auto& sh : shards->items()) {
            ShardSpec spec;
            spec.id = as_id(sh.at("id"));
            for (const auto& g : sh.at("gateways").items()) {
                spec.gateways.insert(as_id(g));
            }
            s.shards.push_back(std::move(spec));
        }
    }
    if (root.has("checkpoint_interval_windows")) {
        s.checkpoint_interval_windows = static_cast<std::uint32_t>(root.at("checkpoint_interval_windows").as_uint());
    }
    if (auto orch = root.maybe("orchestrator")) {
        if (orch->has("backup")) {
            s.backup_orchestrator = orch->at("backup").as_bool();
        }
    }

    if (auto faults = root.maybe("faults")) {
        if (auto overrides = faults->maybe("loss_overrides")) {
            for (const auto& o : overrides->items()) {
                LossOverride rule;
                rule.from = at_ms(o.at("from_ms").as_int());
                rule.to = at_ms(o.at("to_ms").as_int());
                if (auto d = o.maybe("device")) {
                    rule.device = as_id(*d);
                }
                if (auto g = o.maybe("gateway")) {
                    rule.gateway = as_id(*g);
                }
                rule.drop_probability = o.at("drop_probability").as_double();
                s.faults.loss_overrides.push_back(rule);
            }
        }
        if (auto outages = faults->maybe("gateway_outages")) {
            for (const auto& o : outages->items()) {
                GatewayOutage outage;
                outage.gateway = as_id(o.at("gateway"));
                outage.from = at_ms(o.at("from_ms").as_int());
                outage.to = at_ms(o.at("to_ms").as_int());
                if (auto mode = o.maybe("mode")) {
                    const auto m = mode->as_string();
                    if (m == "drop") {
                        outage.mode = OutageMode::Drop;
                    }
                    else if (m == "buffer") {
                        outage.mode = OutageMode::Buffer;
                    }
                    else {
                        fail(mode->path(), "mode must be 'drop' or 'buffer'");
                    }
                }
                s.faults.gateway_outages.push_back(outage);
            }
        }
        if (auto dups = faults->maybe("duplicate_forwards")) {
            for (const auto& o : dups->items()) {
                DuplicateForward dup;
                dup.gateway = as_id(o.at("gateway"));
                dup.from = at_ms(o.at("from_ms").as_int());
                dup.to = at_ms(o.at("to_ms").as_int());
                dup.probability = o.at("probability").as_double();
                dup.delay_ms = o.int_or("delay_ms", dup.delay_ms);
                s.faults.duplicate_forwards.push_back(dup);
            }
        }
        if (auto kill = faults->maybe("orchestrator_kill_ms")) {
            s.faults.orchestrator_kill = at_ms(kill->as_int());
        }
        if (auto failures = faults->maybe("checkpoint_failures")) {
            for (const auto& f : failures->items()) {
                s.faults.checkpoint_failures.insert(f.as_uint());
            }
        }
    }
    return s;
}

json position_json(Position p)
{
    return json::array({p.x, p.y});
}

json snr_json(const SnrParams& snr)
{
    return {{"snr_at_ref_db", snr.snr_at_ref_db},
            {"ref_distance_m", snr.ref_distance_m},
            {"path_loss_exponent", snr.path_loss_exponent},
            {"noise_sigma_db", snr.noise_sigma_db}};
}

}  // namespace

const DeviceSpec& Scenario::device(DeviceId id) const
{
    for (const auto& d : devices) {
        if (d.id == id) {
            return d;
        }
    }
    throw std::out_of_range("unknown device " + std::to_string(id));
}

const recovery::QuorumAssignment& Scenario::quorum_of(DeviceId id) const
{
    for (const auto& q : quorums) {
        if (q.node == id) {
            return q;
        }
    }
    throw std::out_of_range("no quorum for device " + std::to_string(id));
}

LinkParams Scenario::link_params(DeviceId device, GatewayId gateway) const
{
    for (const auto& l : links) {
        if (l.device == device && l.gateway == gateway) {
            return l.params;
        }
    }
    return link_defaults;
}

std::vector<ShardSpec> Scenario::effective_shards() const
{
    if (!shards.empty()) {
        return shards;
    }
    ShardSpec all{1, {}};
    for (const auto& g : gateways) {
        all.gateways.insert(g.id);
    }
    return {all};
}

std::pair<DeviceId, DeviceId> Scenario::effective_bcw_devices() const
{
    if (bcw_devices) {
        return *bcw_devices;
    }
    const DeviceSpec* first[2] = {nullptr, nullptr};
    for (const auto& d : devices) {
        auto& slot = first[d.stream == 1 ? 0 : 1];
        if (slot == nullptr) {
            slot = &d;
        }
    }
    if (first[0] == nullptr || first[1] == nullptr) {
        throw ScenarioError("devices: need at least one device per stream");
    }
    return {first[0]->id, first[1]->id};
}

Millis Scenario::base_composite_window() const
{
    const auto [a, b] = effective_bcw_devices();
    const auto& d1 = device(a);
    const auto& d2 = device(b);
    return windowing::initial_window(d1.message_size, d1.data_rate, d2.message_size, d2.data_rate);
}

void validate_scenario(const Scenario& s)
{
    if (s.duration_ms <= 0) {
        fail("duration_ms", "must be positive");
    }
    if (s.receive_windows.rx_width_ms <= 0 || s.receive_windows.rx1_offset_ms < 0 ||
        s.receive_windows.rx2_offset_ms <= s.receive_windows.rx1_offset_ms ||
        s.receive_windows.class_b_period_ms <= 0) {
        fail("receive_windows", "offsets must increase and width and period must be positive");
    }

    std::set<GatewayId> gateway_ids;
    for (std::size_t i = 0; i < s.gateways.size(); ++i) {
        if (!gateway_ids.insert(s.gateways[i].id).second) {
            fail("gateways[" + std::to_string(i) + "].id", "duplicate gateway id");
        }
    }
    if (gateway_ids.size() < 3) {
        fail("gateways", "at least three gateways are required");
    }

    std::set<DeviceId> device_ids;
    std::set<std::pair<std::string, int>> key_streams;
    for (std::size_t i = 0; i < s.devices.size(); ++i) {
        const auto& d = s.devices[i];
        const auto path = "devices[" + std::to_string(i) + "]";
        if (!device_ids.insert(d.id).second) {
            fail(path + ".id", "duplicate device id");
        }
        if (d.stream != 1 && d.stream != 2) {
            fail(path + ".stream", "must be 1 or 2");
        }
        if (d.key.empty()) {
            fail(path + ".key", "must not be empty");
        }
        if (!key_streams.insert({d.key, d.stream}).second) {
            fail(path + ".key", "another device already feeds stream " + std::to_string(d.stream) + " of key '" +
                                    d.key + "'");
        }
        if (d.data_rate <= 0) {
            fail(path + ".data_rate", "must be positive");
        }
        if (d.message_size <= 0) {
            fail(path + ".message_size", "must be positive");
        }
        if (d.send_period_ms <= 0) {
            fail(path + ".send_period_ms", "must be positive");
        }
        if (d.send_offset_ms < 0) {
            fail(path + ".send_offset_ms", "must be non-negative");
        }
    }
    if (device_ids.empty()) {
        fail("devices", "at least one device is required");
    }
    for (const auto& [key, stream] : key_streams) {
        const int other = stream == 1 ? 2 : 1;
        if (!key_streams.contains({key, other})) {
            fail("devices", "key '" + key + "' has no device on stream " + std::to_string(other));
        }
    }

    auto check_link = [](const LinkParams& l, const std::string& path) {
        check_probability(l.drop_probability, path + ".drop_probability");
        if (l.delay_ms < 0) {
            fail(path + ".delay_ms", "must be non-negative");
        }
        if (l.snr.ref_distance_m <= 0.0) {
            fail(path + ".snr.ref_distance_m", "must be positive");
        }
        if (l.snr.noise_sigma_db < 0.0) {
            fail(path + ".snr.noise_sigma_db", "must be non-negative");
        }
    };
    check_link(s.link_defaults, "link_defaults");
    for (std::size_t i = 0; i < s.links.size(); ++i) {
        const auto path = "links[" + std::to_string(i) + "]";
        if (!device_ids.contains(s.links[i].device)) {
            fail(path + ".device", "unknown device");
        }
        if (!gateway_ids.contains(s.links[i].gateway)) {
            fail(path + ".gateway", "unknown gateway");
        }
        check_link(s.links[i].params, path);
    }

    std::set<DeviceId> with_quorum;
    for (std::size_t i = 0; i < s.quorums.size(); ++i) {
        const auto& q = s.quorums[i];
        const auto path = "quorums[" + std::to_string(i) + "]";
        if (!device_ids.contains(q.node)) {
            fail(path + ".node", "unknown device");
        }
        if (!with_quorum.insert(q.node).second) {
            fail(path + ".node", "device already has a quorum");
        }
        try {
            q.validate();
        }
        catch (const std::invalid_argument& e) {
            fail(path + ".gateways", e.what());
        }
        for (std::size_t j = 0; j < q.gateways.size(); ++j) {
            if (!gateway_ids.contains(q.gateways[j])) {
                fail(path + ".gateways[" + std::to_string(j) + "]", "unknown gateway");
            }
        }
    }
    for (auto id : device_ids) {
        if (!with_quorum.contains(id)) {
            fail("quorums", "device " + std::to_string(id) + " has no quorum");
        }
    }

    try {
        s.window.validate();
    }
    catch (const std::invalid_argument& e) {
        fail("window", e.what());
    }
    if (s.watermark_delay_ms < 0) {
        fail("window.watermark_delay_ms", "must be non-negative");
    }
    if (s.bcw_devices) {
        if (!device_ids.contains(s.bcw_devices->first) || !device_ids.contains(s.bcw_devices->second)) {
            fail("window.bcw_devices", "unknown device");
        }
    }
    if (s.window.min_size_ms > s.base_composite_window()) {
        fail("window.min_size_ms", "exceeds the base composite window of " +
                                       std::to_string(s.base_composite_window()) + " ms");
    }

    try {
        s.data_rates.validate();
    }
    catch (const std::invalid_argument& e) {
        fail("data_rates", e.what());
    }
    if (s.initial_rate_index < 0 || s.initial_rate_index > s.data_rates.max_rate_index()) {
        fail("data_rates.initial_rate_index", "out of range");
    }
    if (!(s.firing_threshold_m >= 0.0)) {
        fail("firing_threshold_m", "must be non-negative");
    }

    std::set<join::ShardId> shard_ids;
    std::set<GatewayId> consumed;
    for (std::size_t i = 0; i < s.shards.size(); ++i) {
        const auto path = "shards[" + std::to_string(i) + "]";
        if (!shard_ids.insert(s.shards[i].id).second) {
            fail(path + ".id", "duplicate shard id");
        }
        if (s.shards[i].gateways.empty()) {
            fail(path + ".gateways", "must not be empty");
        }
        for (auto g : s.shards[i].gateways) {
            if (!gateway_ids.contains(g)) {
                fail(path + ".gateways", "unknown gateway " + std::to_string(g));
            }
            consumed.insert(g);
        }
    }
    if (!s.shards.empty() && consumed != gateway_ids) {
        fail("shards", "every gateway must be consumed by at least one shard");
    }
    if (s.checkpoint_interval_windows == 0) {
        fail("checkpoint_interval_windows", "must be positive");
    }

    for (std::size_t i = 0; i < s.faults.loss_overrides.size(); ++i) {
        const auto& o = s.faults.loss_overrides[i];
        const auto path = "faults.loss_overrides[" + std::to_string(i) + "]";
        check_interval(o.from, o.to, path);
        check_probability(o.drop_probability, path + ".drop_probability");
        if (o.device && !device_ids.contains(*o.device)) {
            fail(path + ".device", "unknown device");
        }
        if (o.gateway && !gateway_ids.contains(*o.gateway)) {
            fail(path + ".gateway", "unknown gateway");
        }
    }
    for (std::size_t i = 0; i < s.faults.gateway_outages.size(); ++i) {
        const auto& o = s.faults.gateway_outages[i];
        const auto path = "faults.gateway_outages[" + std::to_string(i) + "]";
        check_interval(o.from, o.to, path);
        if (!gateway_ids.contains(o.gateway)) {
            fail(path + ".gateway", "unknown gateway");
        }
    }
    for (std::size_t i = 0; i < s.faults.duplicate_forwards.size(); ++i) {
        const auto& o = s.faults.duplicate_forwards[i];
        const auto path = "faults.duplicate_forwards[" + std::to_string(i) + "]";
        check_interval(o.from, o.to, path);
        check_probability(o.probability, path + ".probability");
        if (!gateway_ids.contains(o.gateway)) {
            fail(path + ".gateway", "unknown gateway");
        }
        if (o.delay_ms < 0) {
            fail(path + ".delay_ms", "must be non-negative");
        }
    }
    if (s.faults.orchestrator_kill) {
        const auto kill = *s.faults.orchestrator_kill;
        if (kill.ticks <= 0 || kill.ticks >= s.duration_ms) {
            fail("faults.orchestrator_kill_ms", "must lie strictly inside the run");
        }
        if (!s.backup_orchestrator) {
            fail("faults.orchestrator_kill_ms", "a kill requires orchestrator.backup = true");
        }
    }
    for (auto attempt : s.faults.checkpoint_failures) {
        if (attempt == 0) {
            fail("faults.checkpoint_failures", "attempt numbers start at 1");
        }
    }
}

Scenario parse_scenario(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    }
    catch (const json::parse_error& e) {
        throw ScenarioError(std::string("<root>: invalid JSON: ") + e.what());
    }
    auto scenario = parse(doc);
    validate_scenario(scenario);
    return scenario;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScenarioError("<root>: cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string scenario_to_json(const Scenario& s)
{
    json doc;
    doc["seed"] = s.seed;
    doc["duration_ms"] = s.duration_ms;
    doc["receive_windows"] = {{"rx1_offset_ms", s.receive_windows.rx1_offset_ms},
                              {"rx2_offset_ms", s.receive_windows.rx2_offset_ms},
                              {"rx_width_ms", s.receive_windows.rx_width_ms},
                              {"class_b_period_ms", s.receive_windows.class_b_period_ms}};
    doc["gateways"] = json::array();
    for (const auto& g : s.gateways) {
        doc["gateways"].push_back({{"id", g.id}, {"position", position_json(g.position)}});
    }
    doc["devices"] = json::array();
    for (const auto& d : s.devices) {
        doc["devices"].push_back({{"id", d.id},
                                  {"class", to_string(d.device_class)},
                                  {"position", position_json(d.position)},
                                  {"data_rate", d.data_rate},
                                  {"message_size", d.message_size},
                                  {"stream", d.stream},
                                  {"key", d.key},
                                  {"entity_kind", d.entity_kind == EntityKind::BaseEntity ? "base" : "business"},
                                  {"send_period_ms", d.send_period_ms},
                                  {"send_offset_ms", d.send_offset_ms}});
    }
    doc["link_defaults"] = {{"drop_probability", s.link_defaults.drop_probability},
                            {"delay_ms", s.link_defaults.delay_ms},
                            {"snr", snr_json(s.link_defaults.snr)}};
    doc["links"] = json::array();
    for (const auto& l : s.links) {
        doc["links"].push_back({{"device", l.device},
                                {"gateway", l.gateway},
                                {"drop_probability", l.params.drop_probability},
                                {"delay_ms", l.params.delay_ms},
                                {"snr", snr_json(l.params.snr)}});
    }
    doc["quorums"] = json::array();
    for (const auto& q : s.quorums) {
        doc["quorums"].push_back({{"node", q.node}, {"gateways", q.gateways}});
    }
    doc["window"] = {{"desired_latency_ms", s.window.desired_latency_ms},
                     {"window_factor", s.window.window_factor},
                     {"late_threshold", s.window.late_threshold},
                     {"history_len", s.window.history_len},
                     {"fallback", s.window.fallback == windowing::FallbackOrder::LastKnownGoodFirst
                                      ? "last_known_good_first"
                                      : "moving_average_first"},
                     {"min_size_ms", s.window.min_size_ms},
                     {"latency_statistic",
                      s.window.latency_statistic == windowing::LatencyStatistic::Mean ? "mean" : "p95"},
                     {"watermark_delay_ms", s.watermark_delay_ms}};
    if (s.bcw_devices) {
        doc["window"]["bcw_devices"] = {s.bcw_devices->first, s.bcw_devices->second};
    }
    doc["data_rates"] = {{"required_snr_db", s.data_rates.required_snr_db},
                         {"margin_db", s.data_rates.margin_db},
                         {"snr_step_db", s.data_rates.snr_step_db},
                         {"max_power_index", s.data_rates.max_power_index},
                         {"initial_rate_index", s.initial_rate_index}};
    doc["firing_threshold_m"] = s.firing_threshold_m;
    doc["shards"] = json::array();
    for (const auto& sh : s.shards) {
        doc["shards"].push_back({{"id", sh.id}, {"gateways", sh.gateways}});
    }
    doc["checkpoint_interval_windows"] = s.checkpoint_interval_windows;
    doc["orchestrator"] = {{"backup", s.backup_orchestrator}};

    json faults = json::object();
    faults["loss_overrides"] = json::array();
    for (const auto& o : s.faults.loss_overrides) {
        json j = {{"from_ms", o.from.ticks}, {"to_ms", o.to.ticks}, {"drop_probability", o.drop_probability}};
        if (o.device) {
            j["device"] = *o.device;
        }
        if (o.gateway) {
            j["gateway"] = *o.gateway;
        }
        faults["loss_overrides"].push_back(j);
    }
    faults["gateway_outages"] = json::array();
    for (const auto& o : s.faults.gateway_outages) {
        faults["gateway_outages"].push_back({{"gateway", o.gateway},
                                             {"from_ms", o.from.ticks},
                                             {"to_ms", o.to.ticks},
                                             {"mode", o.mode == OutageMode::Drop ? "drop" : "buffer"}});
    }
    faults["duplicate_forwards"] = json::array();
    for (const auto& o : s.faults.duplicate_forwards) {
        faults["duplicate_forwards"].push_back({{"gateway", o.gateway},
                                                {"from_ms", o.from.ticks},
                                                {"to_ms", o.to.ticks},
                                                {"probability", o.probability},
                                                {"delay_ms", o.delay_ms}});
    }
    if (s.faults.orchestrator_kill) {
        faults["orchestrator_kill_ms"] = s.faults.orchestrator_kill->ticks;
    }
    faults["checkpoint_failures"] = s.faults.checkpoint_failures;
    doc["faults"] = faults;
    return doc.dump(2);
}

}  // namespace lorastream
