#ifndef VISIM_ROUTING_H
#define VISIM_ROUTING_H

#include "visim/packet.h"
#include "visim/sim_core.h"
#include "visim/trace.h"

#include <functional>
#include <memory>
#include <string_view>

namespace visim
{

enum class Protocol : uint8_t
{
    Aodv = 0,
    Dsr = 1,
    Dsdv = 2,
};

const char* ToString(Protocol p);
std::optional<Protocol> ParseProtocol(std::string_view name);

/// What a routing agent may ask of the node it runs on.
class NodeServices
{
  public:
    virtual ~NodeServices() = default;

    virtual NodeId Self() const = 0;
    virtual double Now() const = 0;
    virtual std::size_t NodeCount() const = 0;

    /// Hands a packet to the interface queue, addressed to nextHop (or kBroadcast).
    virtual void SendFrame(Packet pkt, NodeId nextHop) = 0;
    /// Passes a packet addressed to this node up to the transport agent.
    virtual void DeliverUp(const Packet& pkt) = 0;

    virtual EventId After(double delay, std::function<void()> fn) = 0;
    virtual void Cancel(EventId id) = 0;

    /// Records an RTR-layer trace line for pkt at this node.
    virtual void Trace(TraceEvent evt, const Packet& pkt, DropReason reason = DropReason::None) = 0;

    virtual PacketUid NewUid() = 0;
    /// The shared "protocol" random stream.
    virtual RngStream& Rng() = 0;
};

class RoutingAgent
{
  public:
    virtual ~RoutingAgent() = default;

    virtual Protocol Kind() const = 0;
    virtual void Start()
    {
    }

    /// A data or ack packet from the local transport agent.
    virtual void Send(Packet pkt) = 0;
    /// A frame the MAC received, sent by neighbor `from`.
    virtual void Receive(Packet pkt, NodeId from) = 0;
    /// Unicast to nextHop failed after all MAC retries.
    virtual void LinkFailed(Packet pkt, NodeId nextHop) = 0;
};

/// Builds a control packet with the fixed routing size.
Packet MakeControlPacket(NodeServices& node, PacketClass cls, NodeId dst, Payload payload);

/// Upper bound on broadcast forwarding jitter, seconds.
inline constexpr double kBroadcastJitter = 0.01;

} // namespace visim

#endif // VISIM_ROUTING_H
