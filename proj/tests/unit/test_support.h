#ifndef VISIM_TEST_SUPPORT_H
#define VISIM_TEST_SUPPORT_H

#include "visim/routing.h"
#include "visim/simulation.h"
#include "visim/world.h"

#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

namespace visim::test
{

/// NodeServices stand-in that records everything an agent asks for.
class FakeNode : public NodeServices
{
  public:
    struct Sent
    {
        Packet pkt;
        NodeId nextHop;
    };

    struct Traced
    {
        TraceEvent evt;
        Packet pkt;
        DropReason reason;
    };

    FakeNode(Simulator& sim, NodeId self, std::size_t nodes = 8, uint64_t seed = 1)
        : m_sim(sim),
          m_self(self),
          m_nodes(nodes),
          m_rng(seed, "protocol")
    {
    }

    NodeId Self() const override
    {
        return m_self;
    }

    double Now() const override
    {
        return m_sim.Now();
    }

    std::size_t NodeCount() const override
    {
        return m_nodes;
    }

    void SendFrame(Packet pkt, NodeId nextHop) override
    {
        sent.push_back({std::move(pkt), nextHop});
    }

    void DeliverUp(const Packet& pkt) override
    {
        delivered.push_back(pkt);
    }

    EventId After(double delay, std::function<void()> fn) override
    {
        return m_sim.Schedule(delay, std::move(fn), EventKind::Timer, m_self);
    }

    void Cancel(EventId id) override
    {
        m_sim.Cancel(id);
    }

    void Trace(TraceEvent evt, const Packet& pkt, DropReason reason) override
    {
        traced.push_back({evt, pkt, reason});
    }

    PacketUid NewUid() override
    {
        return m_nextUid++;
    }

    RngStream& Rng() override
    {
        return m_rng;
    }

    std::vector<Sent> SentOfClass(PacketClass c) const
    {
        std::vector<Sent> out;
        for (const auto& s : sent)
        {
            if (s.pkt.cls == c)
            {
                out.push_back(s);
            }
        }
        return out;
    }

    std::size_t Drops(DropReason r) const
    {
        std::size_t n = 0;
        for (const auto& t : traced)
        {
            n += t.evt == TraceEvent::Drop && t.reason == r;
        }
        return n;
    }

    std::vector<Sent> sent;
    std::vector<Packet> delivered;
    std::vector<Traced> traced;

  private:
    Simulator& m_sim;
    NodeId m_self;
    std::size_t m_nodes;
    RngStream m_rng;
    PacketUid m_nextUid = 1000;
};

inline Packet
DataPacket(PacketUid uid, NodeId src, NodeId dst, int64_t seq = 0)
{
    Packet p;
    p.uid = uid;
    p.cls = PacketClass::Data;
    p.size = kDataSize;
    p.src = src;
    p.dst = dst;
    p.payload = DataPayload{0, seq};
    return p;
}

inline Packet
Control(PacketClass cls, NodeId src, NodeId dst, Payload payload, PacketUid uid = 1)
{
    Packet p;
    p.uid = uid;
    p.cls = cls;
    p.size = kRoutingSize;
    p.src = src;
    p.dst = dst;
    p.payload = std::move(payload);
    return p;
}

/// A static world of fixed positions running one protocol on every node.
struct StaticNet
{
    Simulator sim;
    MemoryTrace trace;
    World world;
    std::vector<std::vector<Packet>> delivered;

    StaticNet(const std::vector<Vec2>& positions, Protocol protocol, uint64_t seed = 1, double txRange = 250.0)
        : world(sim, Config(txRange), &trace, seed),
          delivered(positions.size())
    {
        for (const auto& p : positions)
        {
            MobilityParams m;
            m.isStatic = true;
            world.AddNode(p, m);
        }
        for (NodeId id = 0; id < static_cast<NodeId>(positions.size()); ++id)
        {
            world.SetRouting(id, MakeAgent(protocol, world.Services(id)));
            world.SetUpperLayer(id, [this, id](const Packet& pkt) { delivered[id].push_back(pkt); });
        }
        world.Start();
    }

    static WorldConfig Config(double txRange)
    {
        WorldConfig cfg;
        cfg.channel = ChannelParams::WithRanges(txRange, txRange * 2.2);
        return cfg;
    }

    /// Injects a data packet at src (traced at AGT like the flow driver).
    PacketUid SendData(NodeId src, NodeId dst, int64_t seq = 0)
    {
        Packet p = DataPacket(world.NewUid(), src, dst, seq);
        world.TraceRecordAt(src, TraceEvent::Send, Layer::Agt, p, DropReason::None);
        const PacketUid uid = p.uid;
        world.SendFromAgent(src, std::move(p));
        return uid;
    }

    void RunUntil(double t)
    {
        sim.RunUntil(t);
    }

    template <typename Agent>
    Agent& As(NodeId id)
    {
        return dynamic_cast<Agent&>(world.Routing(id));
    }

    std::vector<TraceRecord> Records() const
    {
        std::vector<TraceRecord> out;
        for (const auto& l : trace.Lines())
        {
            if (const auto* r = std::get_if<TraceRecord>(&l))
            {
                out.push_back(*r);
            }
        }
        return out;
    }
};

/// Unit-disk adjacency for positions and range.
inline std::vector<std::vector<NodeId>>
Adjacency(const std::vector<Vec2>& pos, double range)
{
    std::vector<std::vector<NodeId>> adj(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i)
    {
        for (std::size_t j = 0; j < pos.size(); ++j)
        {
            if (i != j && Distance(pos[i], pos[j]) <= range)
            {
                adj[i].push_back(static_cast<NodeId>(j));
            }
        }
    }
    return adj;
}

/// Brute-force hop distances from src (nullopt when unreachable).
inline std::vector<std::optional<uint32_t>>
BfsHops(const std::vector<std::vector<NodeId>>& adj, NodeId src)
{
    std::vector<std::optional<uint32_t>> d(adj.size());
    std::queue<NodeId> q;
    d[src] = 0;
    q.push(src);
    while (!q.empty())
    {
        NodeId u = q.front();
        q.pop();
        for (NodeId v : adj[u])
        {
            if (!d[v])
            {
                d[v] = *d[u] + 1;
                q.push(v);
            }
        }
    }
    return d;
}

} // namespace visim::test

#endif // VISIM_TEST_SUPPORT_H
