#include "disco/messenger/mlldp.hpp"

#include <fmt/format.h>

namespace disco::messenger {

namespace {

enum Offset : std::size_t {
    kChassisTlv = 0,
    kPortTlv = 5,
    kTtlTlv = 10,
    kCustomTlv = 14,
    kOui = 16,
    kSubtype = 19,
    kControllerField = 20,
    kSwitchField = 29,
    kPortField = 32,
    kIpField = 35,
    kServerPortField = 40,
    kNameField = 43,
    kEndTlv = 54,
};

constexpr std::uint16_t kCustomTlvLength = 38;

void put_tlv_header(std::uint8_t* out, std::uint8_t type, std::uint16_t length) {
    out[0] = static_cast<std::uint8_t>((type << 1) | ((length >> 8) & 0x01));
    out[1] = static_cast<std::uint8_t>(length & 0xFF);
}

void put_u16(std::uint8_t* out, std::uint16_t v) {
    out[0] = static_cast<std::uint8_t>(v >> 8);
    out[1] = static_cast<std::uint8_t>(v & 0xFF);
}

std::uint16_t get_u16(const std::uint8_t* in) {
    return static_cast<std::uint16_t>((in[0] << 8) | in[1]);
}

void put_text(std::uint8_t* out, const std::string& text, std::size_t width, const char* what) {
    if (text.empty() || text.size() > width) {
        throw MlldpEncodeError(fmt::format("{} '{}' must be 1..{} bytes", what, text, width));
    }
    for (std::size_t i = 0; i < width; ++i) {
        out[i] = i < text.size() ? static_cast<std::uint8_t>(text[i]) : 0;
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void expect(std::size_t at, std::uint8_t value, const char* what) const {
        need(at + 1);
        if (bytes_[at] != value) {
            throw MlldpDecodeError(at, fmt::format("{}: expected 0x{:02X}, got 0x{:02X}", what, value, bytes_[at]));
        }
    }

    void expect_tlv(std::size_t at, std::uint8_t type, std::uint16_t length, const char* what) const {
        need(at + 2);
        std::uint8_t got_type = bytes_[at] >> 1;
        std::uint16_t got_length = static_cast<std::uint16_t>(((bytes_[at] & 0x01) << 8) | bytes_[at + 1]);
        if (got_type != type) {
            throw MlldpDecodeError(at, fmt::format("{}: TLV type {} instead of {}", what, got_type, type));
        }
        if (got_length != length) {
            throw MlldpDecodeError(at + 1, fmt::format("{}: TLV length {} instead of {}", what, got_length, length));
        }
    }

    std::uint16_t u16(std::size_t at) const {
        need(at + 2);
        return get_u16(bytes_.data() + at);
    }

    std::string text(std::size_t at, std::size_t width, const char* what) const {
        need(at + width);
        std::string out;
        bool padding = false;
        for (std::size_t i = 0; i < width; ++i) {
            auto c = bytes_[at + i];
            if (c == 0) {
                padding = true;
            } else if (padding) {
                throw MlldpDecodeError(at + i, fmt::format("{}: data after zero padding", what));
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
        if (out.empty()) {
            throw MlldpDecodeError(at, fmt::format("{}: empty", what));
        }
        return out;
    }

    void need(std::size_t end) const {
        if (bytes_.size() < end) {
            throw MlldpDecodeError(bytes_.size(), fmt::format("truncated frame ({} bytes)", bytes_.size()));
        }
    }

    std::uint8_t at(std::size_t i) const {
        need(i + 1);
        return bytes_[i];
    }

private:
    std::span<const std::uint8_t> bytes_;
};

}  // namespace

MlldpDecodeError::MlldpDecodeError(std::size_t position, const std::string& reason)
    : std::runtime_error(fmt::format("M-LLDP rejected at byte {}: {}", position, reason)), position_(position) {}

std::vector<std::uint8_t> encode_mlldp(const MlldpFrame& frame) {
    std::vector<std::uint8_t> out(kMlldpFrameSize, 0);
    auto* p = out.data();

    put_tlv_header(p + kChassisTlv, 1, 3);
    p[kChassisTlv + 2] = 7;
    put_u16(p + kChassisTlv + 3, frame.switch_id);

    put_tlv_header(p + kPortTlv, 2, 3);
    p[kPortTlv + 2] = 7;
    put_u16(p + kPortTlv + 3, frame.switch_port);

    put_tlv_header(p + kTtlTlv, 3, 2);
    put_u16(p + kTtlTlv + 2, frame.ttl_s);

    put_tlv_header(p + kCustomTlv, kCustomTlvType, kCustomTlvLength);
    std::copy(kOpenFlowOui.begin(), kOpenFlowOui.end(), p + kOui);
    p[kSubtype] = kMessengerSubtype;

    p[kControllerField] = 0x02;
    put_text(p + kControllerField + 1, frame.controller_id, kMlldpControllerIdWidth, "controller ID");
    p[kSwitchField] = 0x03;
    put_u16(p + kSwitchField + 1, frame.switch_id);
    p[kPortField] = 0x04;
    put_u16(p + kPortField + 1, frame.switch_port);
    p[kIpField] = 0x05;
    std::copy(frame.server_ip.begin(), frame.server_ip.end(), p + kIpField + 1);
    p[kServerPortField] = 0x06;
    put_u16(p + kServerPortField + 1, frame.server_port);
    p[kNameField] = 0x08;
    put_text(p + kNameField + 1, frame.server_name, kMlldpServerNameWidth, "server name");

    put_tlv_header(p + kEndTlv, 0, 0);
    return out;
}

MlldpFrame decode_mlldp(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    MlldpFrame f;

    r.expect_tlv(kChassisTlv, 1, 3, "chassis ID");
    r.expect(kChassisTlv + 2, 7, "chassis ID subtype");
    r.expect_tlv(kPortTlv, 2, 3, "port ID");
    r.expect(kPortTlv + 2, 7, "port ID subtype");
    r.expect_tlv(kTtlTlv, 3, 2, "TTL");
    f.ttl_s = r.u16(kTtlTlv + 2);

    r.expect_tlv(kCustomTlv, kCustomTlvType, kCustomTlvLength, "custom TLV");
    for (std::size_t i = 0; i < kOpenFlowOui.size(); ++i) {
        r.expect(kOui + i, kOpenFlowOui[i], "OUI");
    }
    r.expect(kSubtype, kMessengerSubtype, "messenger subtype");

    r.expect(kControllerField, 0x02, "controller ID tag");
    f.controller_id = r.text(kControllerField + 1, kMlldpControllerIdWidth, "controller ID");
    r.expect(kSwitchField, 0x03, "switch ID tag");
    f.switch_id = r.u16(kSwitchField + 1);
    r.expect(kPortField, 0x04, "switch port tag");
    f.switch_port = r.u16(kPortField + 1);
    r.expect(kIpField, 0x05, "server IP tag");
    for (std::size_t i = 0; i < 4; ++i) {
        f.server_ip[i] = r.at(kIpField + 1 + i);
    }
    r.expect(kServerPortField, 0x06, "server port tag");
    f.server_port = r.u16(kServerPortField + 1);
    r.expect(kNameField, 0x08, "server name tag");
    f.server_name = r.text(kNameField + 1, kMlldpServerNameWidth, "server name");

    r.expect_tlv(kEndTlv, 0, 0, "end of LLDPDU");
    r.need(kMlldpFrameSize);

    if (f.switch_id != r.u16(kChassisTlv + 3)) {
        throw MlldpDecodeError(kSwitchField + 1, "switch ID disagrees with chassis ID");
    }
    if (f.switch_port != r.u16(kPortTlv + 3)) {
        throw MlldpDecodeError(kPortField + 1, "switch port disagrees with port ID");
    }
    return f;
}

}  // namespace disco::messenger
