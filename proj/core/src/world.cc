#include "visim/world.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace visim
{

const char*
ToString(Protocol p)
{
    switch (p)
    {
    case Protocol::Aodv:
        return "aodv";
    case Protocol::Dsr:
        return "dsr";
    case Protocol::Dsdv:
        return "dsdv";
    }
    return "?";
}

std::optional<Protocol>
ParseProtocol(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    if (lower == "aodv")
        return Protocol::Aodv;
    if (lower == "dsr")
        return Protocol::Dsr;
    if (lower == "dsdv")
        return Protocol::Dsdv;
    return std::nullopt;
}

Packet
MakeControlPacket(NodeServices& node, PacketClass cls, NodeId dst, Payload payload)
{
    Packet p;
    p.uid = node.NewUid();
    p.cls = cls;
    p.size = NominalSize(cls);
    p.src = node.Self();
    p.dst = dst;
    p.payload = std::move(payload);
    return p;
}

class World::NodeContext : public NodeServices
{
  public:
    NodeContext(World& world, NodeId id)
        : m_world(world),
          m_id(id)
    {
    }

    NodeId Self() const override
    {
        return m_id;
    }

    double Now() const override
    {
        return m_world.m_sim.Now();
    }

    std::size_t NodeCount() const override
    {
        return m_world.NodeCount();
    }

    void SendFrame(Packet pkt, NodeId nextHop) override
    {
        m_world.Enqueue(m_id, Frame{std::move(pkt), nextHop});
    }

    void DeliverUp(const Packet& pkt) override
    {
        auto& node = m_world.At(m_id);
        if (node.upper)
        {
            node.upper(pkt);
        }
    }

    EventId After(double delay, std::function<void()> fn) override
    {
        return m_world.m_sim.Schedule(delay, std::move(fn), EventKind::Timer, m_id);
    }

    void Cancel(EventId id) override
    {
        m_world.m_sim.Cancel(id);
    }

    void Trace(TraceEvent evt, const Packet& pkt, DropReason reason) override
    {
        m_world.TraceRecordAt(m_id, evt, Layer::Rtr, pkt, reason);
    }

    PacketUid NewUid() override
    {
        return m_world.NewUid();
    }

    RngStream& Rng() override
    {
        return m_world.m_protocolRng;
    }

  private:
    World& m_world;
    NodeId m_id;
};

World::World(Simulator& sim, WorldConfig cfg, TraceSink* trace, uint64_t seed)
    : m_sim(sim),
      m_cfg(cfg),
      m_trace(trace),
      m_mobilityRng(seed, "mobility"),
      m_macRng(seed, "mac"),
      m_protocolRng(seed, "protocol")
{
}

World::~World() = default;

World::Node&
World::At(NodeId id)
{
    if (id < 0 || static_cast<std::size_t>(id) >= m_nodes.size())
    {
        throw std::out_of_range("unknown node " + std::to_string(id));
    }
    return m_nodes[static_cast<std::size_t>(id)];
}

const World::Node&
World::At(NodeId id) const
{
    if (id < 0 || static_cast<std::size_t>(id) >= m_nodes.size())
    {
        throw std::out_of_range("unknown node " + std::to_string(id));
    }
    return m_nodes[static_cast<std::size_t>(id)];
}

NodeId
World::AddNode(Vec2 start, MobilityParams mobility)
{
    if (m_started)
    {
        throw std::logic_error("nodes must be added before Start()");
    }
    if (!m_cfg.area.Contains(start))
    {
        throw std::invalid_argument("node placed outside the simulation area");
    }
    const auto id = static_cast<NodeId>(m_nodes.size());
    Node node{
        .pose = InitialPose(id, start, m_sim.Now(), mobility, m_cfg.area, m_mobilityRng),
        .mobility = mobility,
        .ifq = IfaceQueue(m_cfg.ifqCapacity),
        .mac = {},
        .routing = nullptr,
        .services = std::make_unique<NodeContext>(*this, id),
        .upper = nullptr,
    };
    node.mac.cw = m_cfg.mac.cwMin;
    m_nodes.push_back(std::move(node));
    return id;
}

void
World::SetRouting(NodeId id, std::unique_ptr<RoutingAgent> agent)
{
    At(id).routing = std::move(agent);
}

void
World::SetUpperLayer(NodeId id, UpperLayer upper)
{
    At(id).upper = std::move(upper);
}

NodeServices&
World::Services(NodeId id)
{
    return *At(id).services;
}

RoutingAgent&
World::Routing(NodeId id)
{
    auto& r = At(id).routing;
    if (!r)
    {
        throw std::logic_error("node has no routing agent");
    }
    return *r;
}

const MacState&
World::Mac(NodeId id) const
{
    return At(id).mac;
}

const NodePose&
World::Pose(NodeId id) const
{
    return At(id).pose;
}

void
World::Teleport(NodeId id, Vec2 pos)
{
    auto& n = At(id);
    n.mobility.isStatic = true;
    n.pose.pos = pos;
    n.pose.waypoint = pos;
    n.pose.speed = 0.0;
    n.pose.moving = false;
}

bool
World::InRange(NodeId a, NodeId b) const
{
    if (a == b)
    {
        return false;
    }
    const Vec2 pa = Position(a);
    const Vec2 pb = Position(b);
    if (pa == pb)
    {
        return true;
    }
    return ReceivedPower(pa, pb, m_cfg.channel) >= m_cfg.channel.rxThreshold;
}

void
World::Start()
{
    if (m_started)
    {
        return;
    }
    m_started = true;
    SampleMobility();
    m_sim.Schedule(
        m_cfg.mobilityStep,
        [this] { MobilityTick(1); },
        EventKind::MobilityStep);
    for (auto& n : m_nodes)
    {
        if (n.routing)
        {
            n.routing->Start();
        }
    }
}

void
World::MobilityTick(uint64_t step)
{
    const double now = m_sim.Now();
    const double prev = static_cast<double>(step - 1) * m_cfg.mobilityStep;
    for (auto& n : m_nodes)
    {
        n.pose = StepMobility(n.pose, prev, now - prev, n.mobility, m_cfg.area, m_mobilityRng);
    }
    const auto perSample = static_cast<uint64_t>(std::llround(m_cfg.mobilitySample / m_cfg.mobilityStep));
    if (perSample > 0 && step % perSample == 0)
    {
        SampleMobility();
    }
    m_sim.ScheduleAt(
        static_cast<double>(step + 1) * m_cfg.mobilityStep,
        [this, step] { MobilityTick(step + 1); },
        EventKind::MobilityStep);
}

void
World::SampleMobility()
{
    if (!m_trace)
    {
        return;
    }
    const double now = m_sim.Now();
    for (const auto& n : m_nodes)
    {
        m_trace->Write(MobilityRecord::Make(now, n.pose.id, n.pose.pos.x, n.pose.pos.y, n.pose.speed));
    }
}

void
World::TraceRecordAt(NodeId node, TraceEvent evt, Layer layer, const Packet& pkt, DropReason reason)
{
    if (!m_trace)
    {
        return;
    }
    TraceRecord r;
    r.evt = evt;
    r.time = ToMicros(m_sim.Now());
    r.node = node;
    r.layer = layer;
    r.uid = pkt.uid;
    r.cls = pkt.cls;
    r.size = pkt.size;
    r.src = pkt.src;
    r.dst = pkt.dst;
    r.reason = reason;
    m_trace->Write(r);
}

void
World::SendFromAgent(NodeId id, Packet pkt)
{
    auto& n = At(id);
    if (pkt.dst == id)
    {
        if (n.upper)
        {
            n.upper(pkt);
        }
        return;
    }
    Routing(id).Send(std::move(pkt));
}

bool
World::Enqueue(NodeId id, Frame frame)
{
    auto& n = At(id);
    if (!n.ifq.Enqueue(frame))
    {
        TraceRecordAt(id, TraceEvent::Drop, Layer::Mac, frame.packet, DropReason::Ifq);
        return false;
    }
    TryStartMac(id);
    return true;
}

void
World::TryStartMac(NodeId id)
{
    auto& n = At(id);
    if (n.mac.active || n.ifq.Empty())
    {
        return;
    }
    auto frame = n.ifq.Dequeue();
    n.mac.active = true;
    n.mac.current = std::move(frame);
    n.mac.cw = m_cfg.mac.cwMin;
    n.mac.retries = 0;
    n.mac.busyRetries = 0;
    ScheduleAttempt(id, std::max(m_sim.Now(), SensedBusyUntil(id)));
}

void
World::AttemptTransmit(NodeId src, Frame frame)
{
    auto& n = At(src);
    if (n.mac.active)
    {
        throw std::logic_error("MAC already holds a frame");
    }
    n.mac.active = true;
    n.mac.current = std::move(frame);
    n.mac.cw = m_cfg.mac.cwMin;
    n.mac.retries = 0;
    n.mac.busyRetries = 0;
    Attempt(src);
}

void
World::ScheduleAttempt(NodeId id, double notBefore)
{
    auto& n = At(id);
    const auto slots = m_macRng.UniformInt(0, n.mac.cw);
    const double at = notBefore + m_cfg.mac.difs + static_cast<double>(slots) * m_cfg.mac.slotTime;
    m_sim.ScheduleAt(
        at,
        [this, id] { Attempt(id); },
        EventKind::Timer,
        id);
}

double
World::SensedBusyUntil(NodeId id) const
{
    const double now = m_sim.Now();
    const Vec2 me = Position(id);
    double until = 0.0;
    for (const auto& tx : m_air)
    {
        if (tx.end <= now || tx.start + m_cfg.mac.senseDelay > now)
        {
            continue;
        }
        const bool audible = tx.sender == id || tx.senderPos == me ||
                             ReceivedPower(tx.senderPos, me, m_cfg.channel) >= m_cfg.channel.csThreshold;
        if (audible)
        {
            until = std::max(until, tx.end);
        }
    }
    return until;
}

bool
World::MediumBusy(NodeId id) const
{
    return SensedBusyUntil(id) > m_sim.Now();
}

void
World::Attempt(NodeId id)
{
    auto& n = At(id);
    if (!n.mac.active || !n.mac.current)
    {
        return;
    }
    const double busyUntil = SensedBusyUntil(id);
    n.mac.mediumBusyUntil = busyUntil;
    if (busyUntil > m_sim.Now())
    {
        if (++n.mac.busyRetries > m_cfg.mac.busyRetryLimit)
        {
            TraceRecordAt(id, TraceEvent::Drop, Layer::Mac, n.mac.current->packet, DropReason::Ret);
            FinishFrame(id);
            return;
        }
        n.mac.cw = std::min(2 * n.mac.cw + 1, m_cfg.mac.cwMax);
        ScheduleAttempt(id, busyUntil);
        return;
    }
    Transmit(id);
}

void
World::Transmit(NodeId id)
{
    auto& n = At(id);
    const Frame& frame = *n.mac.current;
    TraceRecordAt(id, TraceEvent::Send, Layer::Mac, frame.packet, DropReason::None);
    if (m_txObserver)
    {
        m_txObserver(id, frame);
    }
    Transmission tx;
    tx.id = m_nextTxId++;
    tx.sender = id;
    tx.senderPos = n.pose.pos;
    tx.start = m_sim.Now();
    tx.end = tx.start + static_cast<double>(frame.packet.size) * 8.0 / m_cfg.mac.bandwidth;
    PruneTransmissions();
    m_air.push_back(tx);
    m_sim.ScheduleAt(
        tx.end,
        [this, id, tx] { TxEnd(id, tx); },
        EventKind::PacketDelivery,
        id);
}

void
World::PruneTransmissions()
{
    // Longest frame lasts ~4.2 ms; anything ended 50 ms ago cannot overlap
    // with a reception still in progress.
    const double horizon = m_sim.Now() - 0.05;
    while (!m_air.empty() && m_air.front().end < horizon)
    {
        m_air.pop_front();
    }
}

bool
World::InterferenceFree(const Transmission& tx, NodeId rx) const
{
    const Vec2 rxPos = Position(rx);
    for (const auto& other : m_air)
    {
        if (other.id == tx.id)
        {
            continue;
        }
        const bool overlaps = other.start < tx.end && tx.start < other.end;
        if (!overlaps)
        {
            continue;
        }
        if (other.sender == rx)
        {
            return false; // half duplex
        }
        if (other.senderPos == rxPos ||
            ReceivedPower(other.senderPos, rxPos, m_cfg.channel) >= m_cfg.channel.rxThreshold)
        {
            return false;
        }
    }
    return true;
}

bool
World::Receivable(const Transmission& tx, NodeId rx) const
{
    if (rx == tx.sender)
    {
        return false;
    }
    const Vec2 rxPos = Position(rx);
    if (rxPos == tx.senderPos)
    {
        return true;
    }
    return ReceivedPower(tx.senderPos, rxPos, m_cfg.channel) >= m_cfg.channel.rxThreshold;
}

void
World::TxEnd(NodeId id, Transmission tx)
{
    auto& n = At(id);
    Frame frame = *n.mac.current;
    const NodeId sender = id;

    auto deliver = [this, sender](NodeId rx, const Packet& pkt) {
        TraceRecordAt(rx, TraceEvent::Receive, Layer::Mac, pkt, DropReason::None);
        m_sim.Schedule(
            0.0,
            [this, rx, pkt, sender] {
                auto& r = At(rx);
                if (r.routing)
                {
                    r.routing->Receive(pkt, sender);
                }
            },
            EventKind::PacketDelivery,
            rx);
    };

    if (frame.nextHop == kBroadcast)
    {
        for (std::size_t i = 0; i < m_nodes.size(); ++i)
        {
            const auto rx = static_cast<NodeId>(i);
            if (!Receivable(tx, rx))
            {
                continue;
            }
            if (InterferenceFree(tx, rx))
            {
                deliver(rx, frame.packet);
            }
            else
            {
                TraceRecordAt(rx, TraceEvent::Drop, Layer::Mac, frame.packet, DropReason::Col);
            }
        }
        FinishFrame(id);
        return;
    }

    const NodeId rx = frame.nextHop;
    const bool inRange = Receivable(tx, rx);
    if (inRange && InterferenceFree(tx, rx))
    {
        deliver(rx, frame.packet);
        FinishFrame(id);
        return;
    }
    if (inRange)
    {
        TraceRecordAt(rx, TraceEvent::Drop, Layer::Mac, frame.packet, DropReason::Col);
    }
    if (++n.mac.retries > m_cfg.mac.unicastRetries)
    {
        TraceRecordAt(id, TraceEvent::Drop, Layer::Mac, frame.packet, DropReason::Ret);
        FinishFrame(id);
        if (n.routing)
        {
            n.routing->LinkFailed(std::move(frame.packet), rx);
        }
        return;
    }
    n.mac.cw = std::min(2 * n.mac.cw + 1, m_cfg.mac.cwMax);
    n.mac.busyRetries = 0;
    ScheduleAttempt(id, std::max(m_sim.Now(), SensedBusyUntil(id)));
}

void
World::FinishFrame(NodeId id)
{
    auto& n = At(id);
    n.mac.active = false;
    n.mac.current.reset();
    n.mac.cw = m_cfg.mac.cwMin;
    n.mac.retries = 0;
    n.mac.busyRetries = 0;
    TryStartMac(id);
}

} // namespace visim
