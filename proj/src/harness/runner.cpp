#include "disco/harness/runner.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace disco::harness {

std::size_t category_index(std::string_view category) {
    for (std::size_t i = 0; i < kCategories.size(); ++i) {
        if (kCategories[i] == category) {
            return i;
        }
    }
    return 0;
}

std::uint64_t ControlSeries::total(std::size_t second) const {
    std::uint64_t sum = 0;
    for (auto v : buckets.at(second)) {
        sum += v;
    }
    return sum;
}

Simulation::Simulation(Scenario scenario, ctrl::ControllerConfig config)
    : scenario_(std::move(scenario)), network_(loop_, trace_) {
    const auto& topo = scenario_.topology;
    for (const auto& s : topo.switches) {
        network_.add_switch(s);
    }
    for (const auto& l : topo.links) {
        network_.add_link(l);
    }
    for (const auto& h : topo.hosts) {
        network_.add_host(h.address, h.attach);
    }
    const std::size_t seconds = static_cast<std::size_t>((scenario_.duration_ms + 999) / 1000);
    for (const auto& l : topo.links) {
        if (l.kind == LinkKind::peering) {
            auto key = std::make_pair(l.key.from.node.domain, l.key.to.node.domain);
            if (!series_.count(key)) {
                ControlSeries s{key.first, key.second, {}};
                s.buckets.resize(seconds);
                series_.emplace(key, std::move(s));
            }
        }
    }
    for (const auto& d : topo.domains) {
        controllers_.emplace(d, std::make_unique<ctrl::Controller>(d, loop_, trace_, network_, *this, config));
    }
    network_.on_packet_in = [this](const NodeId& at, const FlowSpec& flow) {
        if (auto it = controllers_.find(at.domain); it != controllers_.end()) {
            it->second->packet_in(at, flow);
        }
    };
}

Simulation::~Simulation() = default;

ctrl::Controller& Simulation::controller(const DomainId& d) {
    return *controllers_.at(d);
}

const ControlSeries* Simulation::series(const DomainId& from, const DomainId& to) const {
    auto it = series_.find({from, to});
    return it == series_.end() ? nullptr : &it->second;
}

void Simulation::boot() {
    if (booted_) {
        return;
    }
    booted_ = true;
    for (const auto& a : scenario_.actions) {
        loop_.schedule(a.at, sim::EventKind::scenario_action, [this, a]() { apply(a); });
    }
    for (auto& [_, c] : controllers_) {
        c->load_local();
    }
    for (auto& [_, c] : controllers_) {
        c->start();
    }
}

void Simulation::run(std::optional<SimTime> until) {
    boot();
    loop_.run_until(until.value_or(scenario_.duration_ms));
}

std::optional<DomainId> Simulation::domain_of_host(const std::string& address) const {
    auto at = network_.host_attachment(address);
    if (!at) {
        return std::nullopt;
    }
    return at->node.domain;
}

void Simulation::apply(const Action& a) {
    trace_.log(loop_.now(), "ACTION", to_string(a.verb), fmt::format("{}", fmt::join(a.args, " ")));
    switch (a.verb) {
        case Verb::cut_link:
            network_.cut_link(*a.link);
            break;
        case Verb::restore_link:
            network_.restore_link(*a.link);
            break;
        case Verb::start_flow:
            flow_order_.push_back(a.flow->id);
            network_.inject_flow(sim::FlowTraffic{*a.flow, a.flow->bandwidth_mbps, a.at, a.until, {}});
            break;
        case Verb::stop_flow: {
            const auto& id = a.args.at(0);
            if (network_.has_flow(id)) {
                network_.stop_flow(id);
            }
            for (auto& [_, c] : controllers_) {
                if (c->status(id)) {
                    c->teardown(id);
                }
            }
            break;
        }
        case Verb::request_service:
            if (auto d = domain_of_host(a.flow->src)) {
                controller(*d).admit_service(*a.flow);
            }
            break;
        case Verb::migrate_host: {
            const auto& address = a.args.at(0);
            if (auto old = domain_of_host(address)) {
                network_.detach_host(address);
                controller(*old).host_detached(address);
            }
            network_.attach_host(address, *a.port);
            controller(a.port->node.domain).host_attached(address, *a.port);
            break;
        }
        case Verb::kill_controller:
            controller(*a.domain).kill();
            break;
        case Verb::graceful_leave:
            controller(*a.domain).leave();
            break;
    }
}

void Simulation::send_frame(const DomainId& sender, const LinkKey& link, std::vector<std::uint8_t> frame) {
    (void)sender;
    network_.transmit(link, [this, link, frame = std::move(frame)]() {
        if (auto it = controllers_.find(link.to.node.domain); it != controllers_.end()) {
            it->second->bus().receive_frame(link, frame);
        }
    });
}

void Simulation::send_envelope(const LinkKey& link, messenger::Envelope envelope) {
    network_.transmit(link, [this, link, envelope = std::move(envelope)]() {
        account(link, envelope);
        if (auto it = controllers_.find(link.to.node.domain); it != controllers_.end()) {
            it->second->bus().receive_envelope(link, envelope);
        }
    });
}

void Simulation::account(const LinkKey& link, const messenger::Envelope& envelope) {
    const auto& from = link.from.node.domain;
    const auto& to = link.to.node.domain;
    const auto bytes = envelope.bytes();
    const auto category = envelope.category();
    std::string origin = envelope.sender.str();
    if (const auto* m = std::get_if<messenger::BusMessage>(&envelope.body)) {
        origin = m->origin.str();
    }
    trace_.log(loop_.now(), "RECV", fmt::format("{}->{}", from.str(), to.str()),
               fmt::format("{} bytes={} {} origin={}", category, bytes, envelope.label(), origin));
    auto it = series_.find({from, to});
    if (it == series_.end()) {
        return;
    }
    auto second = static_cast<std::size_t>(loop_.now() / 1000);
    if (second < it->second.buckets.size()) {
        it->second.buckets[second][category_index(category)] += bytes;
    }
}

MetricsReport Simulation::report() const {
    MetricsReport r;
    r.scenario = scenario_.name;
    r.duration_ms = scenario_.duration_ms;
    for (const auto& [_, s] : series_) {
        r.control.push_back(s);
    }
    std::set<std::string> seen;
    auto add_flow = [&](const std::string& id) {
        if (!seen.insert(id).second) {
            return;
        }
        FlowReport f;
        if (network_.has_flow(id)) {
            f.spec = network_.flow(id).flow;
            f.samples = network_.flow(id).samples;
        }
        for (const auto& [_, c] : controllers_) {
            if (auto st = c->status(id)) {
                f.status = st;
                f.spec = st->spec;
            }
        }
        r.flows.push_back(std::move(f));
    };
    for (const auto& id : flow_order_) {
        add_flow(id);
    }
    for (const auto& a : scenario_.actions) {
        if (a.verb == Verb::request_service) {
            add_flow(a.flow->id);
        }
    }
    r.trace = trace_.lines();
    return r;
}

MetricsReport run(const Scenario& scenario) {
    Simulation sim(scenario);
    sim.run();
    return sim.report();
}

std::string control_csv(const ControlSeries& series) {
    std::string out = "second";
    for (auto c : kCategories) {
        out += fmt::format(",{}", c);
    }
    out += ",total\n";
    for (std::size_t i = 0; i < series.buckets.size(); ++i) {
        out += fmt::format("{}", i);
        for (auto v : series.buckets[i]) {
            out += fmt::format(",{}", v);
        }
        out += fmt::format(",{}\n", series.total(i));
    }
    return out;
}

std::string flow_csv(const FlowReport& flow) {
    std::string out = "time_ms,delivered,latency_ms,drop_reason\n";
    for (const auto& s : flow.samples) {
        out += fmt::format("{},{},{},{}\n", s.at, s.delivered ? 1 : 0, s.delivered ? format_ms(s.latency_ms) : "",
                           s.drop_reason);
    }
    return out;
}

std::string flows_summary_csv(const MetricsReport& report) {
    std::string out =
        "flow,src,dst,priority,bandwidth_mbps,max_latency_ms,state,domain_path,expected_latency_ms,offered,delivered,"
        "lost\n";
    for (const auto& f : report.flows) {
        std::size_t delivered = 0;
        for (const auto& s : f.samples) {
            delivered += s.delivered ? 1 : 0;
        }
        std::string path;
        if (f.status) {
            for (const auto& d : f.status->domain_path) {
                path += (path.empty() ? "" : "-") + d.str();
            }
        }
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", f.spec.id, f.spec.src, f.spec.dst,
                           f.spec.priority, format_ms(f.spec.bandwidth_mbps),
                           f.spec.max_latency_ms ? format_ms(*f.spec.max_latency_ms) : "",
                           f.status ? std::string(ctrl::to_string(f.status->state)) : "unknown", path,
                           f.status ? format_ms(f.status->expected_latency_ms) : "", f.samples.size(), delivered,
                           f.samples.size() - delivered);
    }
    return out;
}

std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir, bool with_trace) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto write = [&](const std::string& name, const std::string& content) {
        auto path = std::filesystem::path(dir) / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(fmt::format("cannot write {}", path.string()));
        }
        out << content;
        written.push_back(name);
    };
    for (const auto& s : report.control) {
        write(fmt::format("control_{}_{}.csv", s.from.str(), s.to.str()), control_csv(s));
    }
    for (const auto& f : report.flows) {
        write(fmt::format("flow_{}.csv", f.spec.id), flow_csv(f));
    }
    write("flows.csv", flows_summary_csv(report));
    if (with_trace) {
        std::string text;
        for (const auto& line : report.trace) {
            text += line + "\n";
        }
        write("trace.log", text);
    }
    return written;
}

}  // namespace disco::harness
