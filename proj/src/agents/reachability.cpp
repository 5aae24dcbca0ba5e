#include "disco/agents/agents.hpp"
#include "disco/ctrl/controller.hpp"

namespace disco::agents {

void ReachabilityAgent::host_appeared(const HostId& host) {
    owner_.db().upsert_host(host, owner_.self());
    publish({host}, {});
}

void ReachabilityAgent::host_disappeared(const std::string& address) {
    owner_.db().remove_host(address, owner_.self());
    publish({}, {address});
}

void ReachabilityAgent::publish_full() {
    publish(owner_.db().hosts_in(owner_.self()), {});
}

void ReachabilityAgent::publish(const std::vector<HostId>& added, const std::vector<std::string>& removed) {
    Payload a = Payload::array();
    for (const auto& h : added) {
        a.push_back({{"address", h.address}, {"attach", h.attach ? h.attach->str() : std::string()}});
    }
    Payload r = Payload::array();
    for (const auto& addr : removed) {
        r.push_back(addr);
    }
    ++published_;
    owner_.bus().publish(messenger::Topic("reachability", owner_.self().str(), "update"),
                         Payload{{"origin", owner_.self().str()}, {"added", a}, {"removed", r}},
                         owner_.control_exclusions());
}

void ReachabilityAgent::on_message(const BusMessage& message) {
    if (message.origin == owner_.self()) {
        return;
    }
    auto& db = owner_.db();
    std::vector<std::string> changed;
    for (const auto& h : message.payload.at("added")) {
        HostId host{h.at("address").get<std::string>(), std::nullopt};
        const auto& attach = h.at("attach").get_ref<const std::string&>();
        if (!attach.empty()) {
            host.attach = PortRef::parse(attach);
        }
        auto previous = db.upsert_host(host, message.origin);
        if (previous != message.origin) {
            changed.push_back(host.address);
        }
    }
    for (const auto& r : message.payload.at("removed")) {
        auto addr = r.get<std::string>();
        if (db.remove_host(addr, message.origin)) {
            changed.push_back(addr);
        }
    }
    for (const auto& addr : changed) {
        owner_.on_host_mapping_changed(addr);
    }
}

}  // namespace disco::agents
