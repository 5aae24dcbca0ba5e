#include <algorithm>

#include "disco/agents/agents.hpp"
#include "disco/ctrl/controller.hpp"

namespace disco::agents {

Payload encode_connectivity(const DomainId& origin, const std::vector<PeeringStatus>& status) {
    Payload peering = Payload::array();
    for (const auto& p : status) {
        peering.push_back({{"neighbor", p.neighbor.str()}, {"link", p.link.str()}, {"up", p.up}, {"weak", p.weak}});
    }
    return Payload{{"origin", origin.str()}, {"peering", peering}};
}

std::vector<PeeringStatus> decode_connectivity(const Payload& payload) {
    std::vector<PeeringStatus> out;
    for (const auto& p : payload.at("peering")) {
        out.push_back(PeeringStatus{DomainId(p.at("neighbor").get<std::string>()),
                                    LinkKey::parse(p.at("link").get<std::string>()), p.at("up").get<bool>(),
                                    p.at("weak").get<bool>()});
    }
    return out;
}

std::vector<PeeringStatus> ConnectivityAgent::local_status() const {
    const auto& db = owner_.db();
    std::vector<PeeringStatus> out;
    for (const auto& key : db.peering_links()) {
        out.push_back(PeeringStatus{key.to.node.domain, key, db.link_up(key), owner_.is_weak(key)});
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool ConnectivityAgent::refresh() {
    auto status = local_status();
    owner_.db().set_connectivity(owner_.self(), status);
    if (last_ && *last_ == status) {
        return false;
    }
    publish(status);
    return true;
}

void ConnectivityAgent::publish_full() {
    publish(last_ ? *last_ : local_status());
}

void ConnectivityAgent::publish(const std::vector<PeeringStatus>& status) {
    last_ = status;
    ++published_;
    owner_.bus().publish(messenger::Topic("connectivity", owner_.self().str(), "update"),
                         encode_connectivity(owner_.self(), status), owner_.control_exclusions());
}

void ConnectivityAgent::on_message(const BusMessage& message) {
    if (message.origin == owner_.self()) {
        return;
    }
    owner_.db().set_connectivity(message.origin, decode_connectivity(message.payload));
    owner_.on_topology_changed();
}

}  // namespace disco::agents
