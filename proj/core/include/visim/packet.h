#ifndef VISIM_PACKET_H
#define VISIM_PACKET_H

#include "visim/sim_core.h"

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace visim
{

inline constexpr NodeId kBroadcast = -1;

using PacketUid = int64_t;

enum class PacketClass : uint8_t
{
    Data,
    Ack,
    Rreq,
    Rrep,
    Rerr,
    Update,
};

const char* ToString(PacketClass c);
std::optional<PacketClass> ParsePacketClass(std::string_view token);
bool IsRoutingClass(PacketClass c);

/// Fixed on-air sizes in bytes.
inline constexpr uint32_t kDataSize = 1040;
inline constexpr uint32_t kAckSize = 40;
inline constexpr uint32_t kRoutingSize = 60;

uint32_t NominalSize(PacketClass c);

// ---------------------------------------------------------------------------
// Per-protocol payloads
// ---------------------------------------------------------------------------

struct DataPayload
{
    int32_t flowId = 0;
    int64_t seq = 0;
};

struct AckPayload
{
    int32_t flowId = 0;
    /// Highest in-order sequence received; -1 when nothing arrived in order.
    int64_t cumulative = -1;
};

struct DsdvAdvertEntry
{
    NodeId dest = 0;
    uint32_t seq = 0;
    uint32_t hops = 0;

    bool operator==(const DsdvAdvertEntry&) const = default;
};

struct DsdvUpdatePayload
{
    std::vector<DsdvAdvertEntry> entries;
    bool fullDump = false;
};

struct DsrRreqPayload
{
    NodeId target = 0;
    uint32_t requestId = 0;
    std::vector<NodeId> record;
};

struct DsrRrepPayload
{
    /// Complete discovered route, originator first.
    std::vector<NodeId> route;
};

struct DsrRerrPayload
{
    NodeId from = 0;
    NodeId to = 0;
};

struct AodvRreqPayload
{
    NodeId origin = 0;
    uint32_t originSeq = 0;
    uint32_t rreqId = 0;
    NodeId target = 0;
    uint32_t targetSeq = 0;
    bool targetSeqKnown = false;
    uint32_t hopCount = 0;
};

struct AodvRrepPayload
{
    NodeId origin = 0;
    NodeId target = 0;
    uint32_t targetSeq = 0;
    uint32_t hopCount = 0;
};

struct AodvRerrPayload
{
    struct Unreachable
    {
        NodeId dest = 0;
        uint32_t seq = 0;
    };

    std::vector<Unreachable> unreachable;
};

using Payload = std::variant<std::monostate,
                             DataPayload,
                             AckPayload,
                             DsdvUpdatePayload,
                             DsrRreqPayload,
                             DsrRrepPayload,
                             DsrRerrPayload,
                             AodvRreqPayload,
                             AodvRrepPayload,
                             AodvRerrPayload>;

/**
 * A network unit. src/dst are end-to-end addresses (dst may be kBroadcast);
 * the MAC hop is chosen by the routing layer when the packet is handed down.
 * For DSR, sourceRoute carries the full node sequence and routeIndex is the
 * position of the node currently holding the packet.
 */
struct Packet
{
    PacketUid uid = 0;
    PacketClass cls = PacketClass::Data;
    uint32_t size = kDataSize;
    NodeId src = 0;
    NodeId dst = 0;
    Payload payload;

    std::vector<NodeId> sourceRoute;
    std::size_t routeIndex = 0;
};

} // namespace visim

#endif // VISIM_PACKET_H
