#ifndef VISIM_WORLD_H
#define VISIM_WORLD_H

#include "visim/channel.h"
#include "visim/ifqueue.h"
#include "visim/mobility.h"
#include "visim/routing.h"
#include "visim/sim_core.h"
#include "visim/trace.h"

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace visim
{

/// Simplified 802.11b DCF: carrier sense, slotted binary exponential
/// backoff, implicit MAC ACK, no RTS/CTS.
struct MacParams
{
    double bandwidth = 2e6;     // bit/s
    double slotTime = 20e-6;
    double difs = 50e-6;
    /// A transmission becomes audible to carrier sense this long after it starts.
    double senseDelay = 1e-6;
    int cwMin = 31;
    int cwMax = 1023;
    /// Delivery retries for unicast frames; broadcasts are sent once.
    int unicastRetries = 4;
    /// Consecutive busy-medium deferrals before a frame is dropped.
    int busyRetryLimit = 7;
};

struct WorldConfig
{
    Area area;
    ChannelParams channel = ChannelParams::Default();
    MacParams mac;
    std::size_t ifqCapacity = 50;
    double mobilityStep = 0.1;
    double mobilitySample = 0.5;
};

struct MacState
{
    bool active = false;
    std::optional<Frame> current;
    int cw = 31;
    int retries = 0;
    int busyRetries = 0;
    double mediumBusyUntil = 0.0;
};

/**
 * The physical world: nodes with random-waypoint mobility, a two-ray
 * threshold channel with collision-at-receiver, per-node CSMA MAC and
 * drop-tail interface queue. Routing agents plug in per node.
 */
class World
{
  public:
    using UpperLayer = std::function<void(const Packet&)>;
    using TxObserver = std::function<void(NodeId sender, const Frame& frame)>;

    World(Simulator& sim, WorldConfig cfg, TraceSink* trace, uint64_t seed);
    ~World();
    World(const World&) = delete;
    World& operator=(const World&) = delete;

    NodeId AddNode(Vec2 start, MobilityParams mobility);
    void SetRouting(NodeId id, std::unique_ptr<RoutingAgent> agent);
    void SetUpperLayer(NodeId id, UpperLayer upper);

    /// Starts mobility sampling and every routing agent.
    void Start();

    std::size_t NodeCount() const
    {
        return m_nodes.size();
    }

    const NodePose& Pose(NodeId id) const;
    Vec2 Position(NodeId id) const
    {
        return Pose(id).pos;
    }

    /// True when id `b` receives `a` above the reception threshold.
    bool InRange(NodeId a, NodeId b) const;

    RoutingAgent& Routing(NodeId id);
    NodeServices& Services(NodeId id);
    const MacState& Mac(NodeId id) const;

    /// Local transport entry: routes a data/ack packet originated at `id`.
    void SendFromAgent(NodeId id, Packet pkt);

    /// Drop-tail enqueue; traces an IFQ drop when full.
    bool Enqueue(NodeId id, Frame frame);

    /// Channel access for an already dequeued frame: transmit now if the
    /// medium is idle at `src`, otherwise back off.
    void AttemptTransmit(NodeId src, Frame frame);

    bool MediumBusy(NodeId id) const;

    void SetTxObserver(TxObserver obs)
    {
        m_txObserver = std::move(obs);
    }

    /// Pins a node at a position (tests only; the node stops moving).
    void Teleport(NodeId id, Vec2 pos);

    PacketUid NewUid()
    {
        return m_nextUid++;
    }

    Simulator& Sim()
    {
        return m_sim;
    }

    const WorldConfig& Config() const
    {
        return m_cfg;
    }

    void TraceRecordAt(NodeId node, TraceEvent evt, Layer layer, const Packet& pkt, DropReason reason);

  private:
    class NodeContext;

    struct Node
    {
        NodePose pose;
        MobilityParams mobility;
        IfaceQueue ifq;
        MacState mac;
        std::unique_ptr<RoutingAgent> routing;
        std::unique_ptr<NodeContext> services;
        UpperLayer upper;
    };

    struct Transmission
    {
        uint64_t id = 0;
        NodeId sender = 0;
        Vec2 senderPos;
        double start = 0.0;
        double end = 0.0;
    };

    Node& At(NodeId id);
    const Node& At(NodeId id) const;

    void MobilityTick(uint64_t step);
    void SampleMobility();
    void TryStartMac(NodeId id);
    void ScheduleAttempt(NodeId id, double notBefore);
    void Attempt(NodeId id);
    void Transmit(NodeId id);
    void TxEnd(NodeId id, Transmission tx);
    bool Receivable(const Transmission& tx, NodeId rx) const;
    bool InterferenceFree(const Transmission& tx, NodeId rx) const;
    void FinishFrame(NodeId id);
    void PruneTransmissions();
    double SensedBusyUntil(NodeId id) const;

    Simulator& m_sim;
    WorldConfig m_cfg;
    TraceSink* m_trace;
    RngStream m_mobilityRng;
    RngStream m_macRng;
    RngStream m_protocolRng;
    std::vector<Node> m_nodes;
    std::deque<Transmission> m_air;
    uint64_t m_nextTxId = 0;
    PacketUid m_nextUid = 0;
    TxObserver m_txObserver;
    bool m_started = false;
};

} // namespace visim

#endif // VISIM_WORLD_H
