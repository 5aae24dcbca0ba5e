#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace disco::messenger {

/// Neighbor-controller announcement carried in a custom LLDP TLV.
///
/// Wire layout (60 bytes, big-endian, TLV header = 7-bit type | 9-bit length):
///
///   off  len  content
///    0    2   Chassis ID TLV header (type 1, length 3)
///    2    1     subtype 7 (locally assigned)
///    3    2     switch ID
///    5    2   Port ID TLV header (type 2, length 3)
///    7    1     subtype 7 (locally assigned)
///    8    2     switch port
///   10    2   TTL TLV header (type 3, length 2)
///   12    2     TTL seconds
///   14    2   Custom TLV header (type 0x7F, length 38)
///   16    3     OUI 00 26 E1
///   19    1     subtype 0x17
///   20    9     0x02 controller ID      (8 bytes ASCII, zero padded)
///   29    3     0x03 switch ID          (uint16)
///   32    3     0x04 switch port        (uint16)
///   35    5     0x05 server IP          (4 bytes)
///   40    3     0x06 server port        (uint16)
///   43   11     0x08 server name        (10 bytes ASCII, zero padded)
///   54    2   End of LLDPDU TLV
///   56    4   zero padding
struct MlldpFrame {
    std::string controller_id;
    std::uint16_t switch_id = 0;
    std::uint16_t switch_port = 0;
    std::array<std::uint8_t, 4> server_ip{};
    std::uint16_t server_port = 0;
    std::string server_name;
    std::uint16_t ttl_s = 3;

    bool operator==(const MlldpFrame&) const = default;
};

inline constexpr std::size_t kMlldpFrameSize = 60;
inline constexpr std::size_t kMlldpControllerIdWidth = 8;
inline constexpr std::size_t kMlldpServerNameWidth = 10;
inline constexpr std::uint8_t kCustomTlvType = 0x7F;
inline constexpr std::array<std::uint8_t, 3> kOpenFlowOui{0x00, 0x26, 0xE1};
inline constexpr std::uint8_t kMessengerSubtype = 0x17;

class MlldpEncodeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class MlldpDecodeError : public std::runtime_error {
public:
    MlldpDecodeError(std::size_t position, const std::string& reason);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

std::vector<std::uint8_t> encode_mlldp(const MlldpFrame& frame);
/// Throws MlldpDecodeError carrying the offset of the first violation.
MlldpFrame decode_mlldp(std::span<const std::uint8_t> bytes);

}  // namespace disco::messenger
