#include "visim/simulation.h"

#include "visim/aodv.h"
#include "visim/dsdv.h"
#include "visim/dsr.h"
#include "visim/traffic.h"

#include <cmath>

namespace visim
{

std::unique_ptr<RoutingAgent>
MakeAgent(Protocol protocol, NodeServices& node)
{
    switch (protocol)
    {
    case Protocol::Aodv:
        return std::make_unique<AodvAgent>(node);
    case Protocol::Dsr:
        return std::make_unique<DsrAgent>(node);
    case Protocol::Dsdv:
        return std::make_unique<DsdvAgent>(node);
    }
    throw std::invalid_argument("unknown protocol");
}

WorldConfig
MakeWorldConfig(const ScenarioSpec& spec)
{
    WorldConfig cfg;
    cfg.area = spec.area;
    // Keep the ns-2 carrier-sense to reception range proportion (550/250).
    cfg.channel = ChannelParams::WithRanges(spec.txRange, spec.txRange * 2.2);
    return cfg;
}

namespace
{

/// Binds one FlowSender/FlowReceiver pair to the simulated nodes.
class FlowDriver
{
  public:
    FlowDriver(World& world, const FlowSpec& spec, int32_t id, double end)
        : m_world(world),
          m_spec(spec),
          m_end(end),
          m_sender(spec, id, [&world] { return world.NewUid(); }),
          m_receiver(spec, id, [&world] { return world.NewUid(); })
    {
    }

    void Start()
    {
        if (m_spec.startTime < m_end)
        {
            m_world.Sim().ScheduleAt(m_spec.startTime, [this] { Generate(); }, EventKind::TrafficTick, m_spec.src);
        }
    }

    void OnData(const Packet& pkt)
    {
        m_world.TraceRecordAt(m_spec.dst, TraceEvent::Receive, Layer::Agt, pkt, DropReason::None);
        const auto& d = std::get<DataPayload>(pkt.payload);
        Packet ack = m_receiver.OnData(d.seq);
        m_world.TraceRecordAt(m_spec.dst, TraceEvent::Send, Layer::Agt, ack, DropReason::None);
        m_world.SendFromAgent(m_spec.dst, std::move(ack));
    }

    void OnAck(const Packet& pkt)
    {
        m_world.TraceRecordAt(m_spec.src, TraceEvent::Receive, Layer::Agt, pkt, DropReason::None);
        const auto& a = std::get<AckPayload>(pkt.payload);
        if (m_sender.OnAck(a.cumulative))
        {
            ++m_timerGeneration;
            m_timerArmed = false;
            Push(m_sender.Tick(m_world.Sim().Now()));
            ArmTimer();
        }
    }

    FlowStats Stats() const
    {
        FlowStats s;
        s.delivered = static_cast<int64_t>(m_receiver.Delivered().size());
        s.highestAcked = m_sender.HighestAcked();
        s.retransmissions = m_sender.Retransmissions();
        return s;
    }

  private:
    void Generate()
    {
        Push(m_sender.Tick(m_world.Sim().Now()));
        ArmTimer();
        if (m_spec.interval > 0.0)
        {
            ++m_ticks;
            const double next = m_spec.startTime + static_cast<double>(m_ticks) * m_spec.interval;
            if (next < m_end)
            {
                m_world.Sim().ScheduleAt(next, [this] { Generate(); }, EventKind::TrafficTick, m_spec.src);
            }
        }
    }

    void Push(std::vector<Packet> pkts)
    {
        for (auto& p : pkts)
        {
            m_world.TraceRecordAt(m_spec.src, TraceEvent::Send, Layer::Agt, p, DropReason::None);
            m_world.SendFromAgent(m_spec.src, std::move(p));
        }
    }

    void ArmTimer()
    {
        if (m_timerArmed || m_sender.InFlight() == 0)
        {
            return;
        }
        m_timerArmed = true;
        const uint64_t gen = m_timerGeneration;
        m_world.Sim().Schedule(
            m_sender.Rto(),
            [this, gen] {
                if (gen != m_timerGeneration)
                {
                    return;
                }
                ++m_timerGeneration;
                m_timerArmed = false;
                Push(m_sender.OnTimeout());
                ArmTimer();
            },
            EventKind::Timer,
            m_spec.src);
    }

    World& m_world;
    FlowSpec m_spec;
    double m_end;
    FlowSender m_sender;
    FlowReceiver m_receiver;
    uint64_t m_ticks = 0;
    uint64_t m_timerGeneration = 0;
    bool m_timerArmed = false;
};

} // namespace

RunStats
RunSimulation(const ScenarioSpec& spec,
              Protocol protocol,
              uint64_t seed,
              TraceSink& sink,
              std::optional<double> duration)
{
    ValidateScenario(spec);
    const double end = duration.value_or(spec.duration);
    if (!(end > 0.0))
    {
        throw std::invalid_argument("duration must be positive");
    }

    Simulator sim;
    World world(sim, MakeWorldConfig(spec), &sink, seed);
    for (const auto& n : spec.nodes)
    {
        world.AddNode(n.pos, spec.Mobility(n));
    }
    for (NodeId id = 0; id < static_cast<NodeId>(world.NodeCount()); ++id)
    {
        world.SetRouting(id, MakeAgent(protocol, world.Services(id)));
    }

    std::vector<std::unique_ptr<FlowDriver>> flows;
    for (std::size_t i = 0; i < spec.flows.size(); ++i)
    {
        flows.push_back(std::make_unique<FlowDriver>(world, spec.flows[i], static_cast<int32_t>(i), end));
    }
    for (NodeId id = 0; id < static_cast<NodeId>(world.NodeCount()); ++id)
    {
        // Transport work runs as its own event so a routing agent is never
        // re-entered from inside its own receive path.
        world.SetUpperLayer(id, [&sim, &flows, id](const Packet& pkt) {
            sim.Schedule(
                0.0,
                [&flows, pkt] {
                    if (const auto* d = std::get_if<DataPayload>(&pkt.payload))
                    {
                        flows.at(static_cast<std::size_t>(d->flowId))->OnData(pkt);
                    }
                    else if (const auto* a = std::get_if<AckPayload>(&pkt.payload))
                    {
                        flows.at(static_cast<std::size_t>(a->flowId))->OnAck(pkt);
                    }
                },
                EventKind::PacketDelivery,
                id);
        });
    }

    world.Start();
    for (auto& f : flows)
    {
        f->Start();
    }
    RunStats stats;
    stats.events = sim.RunUntil(end);
    for (const auto& f : flows)
    {
        stats.flows.push_back(f->Stats());
    }
    return stats;
}

RunResult
RunSimulation(const ScenarioSpec& spec, Protocol protocol, uint64_t seed, std::optional<double> duration)
{
    MemoryTrace mem;
    RunResult r;
    r.stats = RunSimulation(spec, protocol, seed, mem, duration);
    r.protocol = protocol;
    r.spec = spec;
    r.seed = seed;
    r.duration = duration.value_or(spec.duration);
    r.trace = mem.Take();
    return r;
}

} // namespace visim
