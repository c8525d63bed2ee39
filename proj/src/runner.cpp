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

#include "lorastream/runner.hpp"

#include <fstream>
#include <memory>
#include <set>

namespace lorastream {

using nlohmann::json;

namespace {

class World {
public:
    World(const Scenario& scenario, std::uint64_t seed, RunResult& result, state::SnapshotStore& store)
        : scenario_(scenario), rng_(seed), network_(scenario.receive_windows), result_(result), store_(store),
          backup_(scenario.backup_orchestrator)
    {
        for (const auto& g : scenario.gateways) {
            network_.add_gateway(Gateway{g.id, g.position});
        }
        for (const auto& d : scenario.devices) {
            network_.add_device(EndDevice{d.id, d.device_class, d.position, d.data_rate, d.message_size, 0, d.stream});
            for (auto g : scenario.quorum_of(d.id).gateways) {
                network_.connect(d.id, g, scenario.link_params(d.id, g));
            }
        }
        for (const auto& o : scenario.faults.loss_overrides) {
            network_.add_loss_override(o);
        }
        for (const auto& o : scenario.faults.gateway_outages) {
            network_.add_gateway_outage(o);
        }
    }

    void run()
    {
        log_setup();
        orchestrator_ = make_orchestrator();
        orchestrator_->start();

        const auto end = at_ms(scenario_.duration_ms);
        if (scenario_.faults.orchestrator_kill) {
            scheduler_.schedule(*scenario_.faults.orchestrator_kill, EventKind::Fault, [this] { kill(); });
        }
        for (const auto& d : scenario_.devices) {
            if (d.send_offset_ms < scenario_.duration_ms) {
                schedule_transmit(d.id, at_ms(d.send_offset_ms));
            }
        }
        schedule_wakeup();
        scheduler_.run_until(end);
        orchestrator_->finish(end);
        result_.final_epoch = orchestrator_->epoch();
        result_.journal_entries = journal_.size();
    }

private:
    void log_setup()
    {
        auto& log = result_.log;
        log.emit(VirtualTime{}, "config",
                 {{"seed", result_.seed},
                  {"duration_ms", scenario_.duration_ms},
                  {"watermark_delay_ms", scenario_.watermark_delay_ms},
                  {"firing_threshold_m", scenario_.firing_threshold_m},
                  {"base_composite_window_ms", scenario_.base_composite_window()},
                  {"checkpoint_interval_windows", scenario_.checkpoint_interval_windows}});
        for (const auto& g : scenario_.gateways) {
            log.emit(VirtualTime{}, "gateway", {{"id", g.id}, {"position", {g.position.x, g.position.y}}});
        }
        for (const auto& d : scenario_.devices) {
            log.emit(VirtualTime{}, "device",
                     {{"id", d.id},
                      {"class", to_string(d.device_class)},
                      {"position", {d.position.x, d.position.y}},
                      {"stream", d.stream},
                      {"key", d.key},
                      {"quorum", scenario_.quorum_of(d.id).gateways}});
        }
    }

    std::unique_ptr<Orchestrator> make_orchestrator()
    {
        auto orchestrator = std::make_unique<Orchestrator>(EngineConfig::from_scenario(scenario_), store_, journal_,
                                                           result_.log, result_.sink);
        orchestrator->set_command_handler([this](const ProbeCommand& command) { send_probe(command); });
        return orchestrator;
    }

    void deliver(JournalEntry entry)
    {
        const auto offset = journal_.append(std::move(entry));
        orchestrator_->consume(offset);
        schedule_wakeup();
    }

    void schedule_wakeup()
    {
        const auto deadline = orchestrator_->next_deadline();
        if (!deadline) {
            return;
        }
        const auto at = *deadline + 1;
        if (at.ticks > scenario_.duration_ms || at <= scheduler_.now() || !wakeups_.insert(at.ticks).second) {
            return;
        }
        scheduler_.schedule(at, EventKind::Wakeup, [this, at] {
            wakeups_.erase(at.ticks);
            deliver(JournalEntry{at, TickInput{}});
        });
    }

    void schedule_transmit(DeviceId device, VirtualTime at)
    {
        scheduler_.schedule(at, EventKind::Transmit, [this, device] { transmit(device); });
    }

    void transmit(DeviceId device)
    {
        const auto& spec = scenario_.device(device);
        const auto now = scheduler_.now();
        Payload payload{spec.key, rng_.uniform_int(0, 999999), spec.entity_kind};
        const auto frame = network_.transmit_uplink(device, payload, now, rng_);

        json receptions = json::array();
        for (const auto& r : frame.receptions) {
            receptions.push_back({r.gateway, r.snr_db, r.arrived_at.ticks});
        }
        result_.log.emit(now, "tx",
                         {{"device", device},
                          {"fc", frame.frame_counter},
                          {"key", spec.key},
                          {"stream", spec.stream},
                          {"value", payload.value},
                          {"receptions", receptions}});

        for (const auto& r : frame.receptions) {
            schedule_reception(frame, r, r.arrived_at);
        }
        for (const auto& r : frame.receptions) {
            for (const auto& dup : scenario_.faults.duplicate_forwards) {
                if (dup.gateway != r.gateway || r.arrived_at < dup.from || r.arrived_at >= dup.to) {
                    continue;
                }
                if (rng_.bernoulli(dup.probability)) {
                    const auto again = r.arrived_at + dup.delay_ms;
                    result_.log.emit(now, "dup",
                                     {{"device", device},
                                      {"fc", frame.frame_counter},
                                      {"gateway", r.gateway},
                                      {"arrival", again.ticks}});
                    schedule_reception(frame, r, again);
                }
            }
        }

        const auto next = now + spec.send_period_ms;
        if (next.ticks < scenario_.duration_ms) {
            schedule_transmit(device, next);
        }
    }

    void schedule_reception(const UplinkFrame& frame, const Reception& reception, VirtualTime arrival)
    {
        ReceptionInput input{frame.device, frame.frame_counter, reception.gateway, reception.snr_db, frame.sent_at,
                             frame.payload};
        scheduler_.schedule(arrival, EventKind::Delivery,
                            [this, input, arrival] { deliver(JournalEntry{arrival, input}); });
    }

    void send_probe(const ProbeCommand& command)
    {
        const auto now = scheduler_.now();
        const auto result = network_.downlink(command.gateway, command.node, now, rng_);
        json fields = {{"device", command.node}, {"gateway", command.gateway}, {"id", command.correlation_id}};
        if (const auto* delivered = std::get_if<Delivered>(&result)) {
            fields["delivered_at"] = delivered->at.ticks;
            const auto echo = network_.relay_reply(command.gateway, command.node, delivered->at, rng_);
            if (echo) {
                fields["echo_at"] = echo->ticks;
                const ProbeEchoInput input{command.node, command.gateway, command.correlation_id};
                const auto at = *echo;
                scheduler_.schedule(at, EventKind::Probe, [this, input, at] { deliver(JournalEntry{at, input}); });
            }
        }
        else {
            fields["undeliverable"] = to_string(std::get<NotDeliverable>(result).reason);
        }
        result_.log.emit(now, "probe_leg", fields);
    }

    void kill()
    {
        const auto now = scheduler_.now();
        result_.log.emit(now, "kill", {{"epoch", orchestrator_->epoch()}, {"unpublished", orchestrator_->pending_outputs()}});
        orchestrator_.reset();
        auto standby = make_orchestrator();
        auto promotion = backup_.promote_backup(*standby, "orchestrator killed");
        orchestrator_ = std::move(standby);
        result_.log.emit(now, "failover",
                         {{"resumed_epoch", promotion.resumed_epoch}, {"replayed", promotion.replayed_inputs}});
        result_.promotions.push_back(std::move(promotion));
        schedule_wakeup();
    }

    const Scenario& scenario_;
    Scheduler scheduler_;
    Rng rng_;
    Network network_;
    RunResult& result_;
    state::SnapshotStore& store_;
    Journal journal_;
    recovery::BackupOrchestrator backup_;
    std::unique_ptr<Orchestrator> orchestrator_;
    std::set<std::int64_t> wakeups_;
};

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options)
{
    validate_scenario(scenario);
    RunResult result;
    result.seed = options.seed.value_or(scenario.seed);

    std::unique_ptr<state::SnapshotStore> store;
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        const auto snapshots = *options.out_dir / "snapshots";
        std::filesystem::remove_all(snapshots);
        store = std::make_unique<state::DirectorySnapshotStore>(snapshots);
    }
    else {
        store = std::make_unique<state::MemorySnapshotStore>();
    }

    World world(scenario, result.seed, result, *store);
    world.run();

    result.report = build_report(parse_event_log(result.log.text()));
    if (options.out_dir) {
        result.log.write(*options.out_dir / "events.jsonl");
        result.sink.write_jsonl(*options.out_dir / "outputs.jsonl");
        write_text(*options.out_dir / "report.json", result.report.to_json().dump(2) + "\n");
    }
    return result;
}

}  // namespace lorastream
