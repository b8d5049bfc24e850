#include "test_support.h"

#include "visim/channel.h"
#include "visim/ifqueue.h"
#include "visim/mobility.h"
#include "visim/world.h"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace visim;
using namespace visim::test;

namespace
{

// Independent two-ray ground model written from the textbook formulas.
double
OraclePower(double d, const ChannelParams& c)
{
    const double crossover = 4.0 * std::numbers::pi * c.txHeight * c.rxHeight / c.wavelength;
    if (d < crossover)
    {
        const double k = 4.0 * std::numbers::pi * d;
        return c.txPower * c.txGain * c.rxGain * c.wavelength * c.wavelength / (k * k * c.systemLoss);
    }
    return c.txPower * c.txGain * c.rxGain * c.txHeight * c.txHeight * c.rxHeight * c.rxHeight /
           (d * d * d * d * c.systemLoss);
}

double
Bisect(double threshold, const ChannelParams& c)
{
    double lo = 1e-3;
    double hi = 1e5;
    for (int i = 0; i < 200; ++i)
    {
        const double mid = 0.5 * (lo + hi);
        (OraclePower(mid, c) >= threshold ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

class RecordingAgent : public RoutingAgent
{
  public:
    Protocol Kind() const override
    {
        return Protocol::Aodv;
    }

    void Send(Packet) override
    {
    }

    void Receive(Packet pkt, NodeId from) override
    {
        received.emplace_back(pkt, from);
    }

    void LinkFailed(Packet pkt, NodeId nextHop) override
    {
        failed.emplace_back(pkt, nextHop);
    }

    std::vector<std::pair<Packet, NodeId>> received;
    std::vector<std::pair<Packet, NodeId>> failed;
};

struct RawNet
{
    Simulator sim;
    MemoryTrace trace;
    World world;
    std::vector<RecordingAgent*> agents;

    explicit RawNet(const std::vector<Vec2>& pos, uint64_t seed = 1)
        : world(sim, WorldConfig{}, &trace, seed)
    {
        for (const auto& p : pos)
        {
            MobilityParams m;
            m.isStatic = true;
            const NodeId id = world.AddNode(p, m);
            auto agent = std::make_unique<RecordingAgent>();
            agents.push_back(agent.get());
            world.SetRouting(id, std::move(agent));
        }
        world.Start();
    }

    std::size_t Count(TraceEvent e, Layer l, NodeId node) const
    {
        std::size_t n = 0;
        for (const auto& line : trace.Lines())
        {
            if (const auto* r = std::get_if<TraceRecord>(&line))
            {
                n += r->evt == e && r->layer == l && r->node == node;
            }
        }
        return n;
    }
};

Packet
Bcast(PacketUid uid, NodeId src)
{
    return Control(PacketClass::Update, src, kBroadcast, std::monostate{}, uid);
}

} // namespace

TEST(Channel, DefaultRangesMatchBisectionOracle)
{
    const auto ch = ChannelParams::Default();
    const double oracleTx = Bisect(ch.rxThreshold, ch);
    const double oracleCs = Bisect(ch.csThreshold, ch);
    EXPECT_NEAR(ch.TxRange(), oracleTx, 1e-6);
    EXPECT_NEAR(ch.CsRange(), oracleCs, 1e-6);
    EXPECT_NEAR(oracleTx, 250.0, 1e-6);
    EXPECT_NEAR(oracleCs, 550.0, 1e-6);
    // The conventional 250 m receive threshold of this radio, 3.652e-10 W.
    EXPECT_NEAR(ch.rxThreshold, 3.652e-10, 0.001e-10);
}

TEST(Channel, PowerMatchesOracleAndDecreases)
{
    const auto ch = ChannelParams::Default();
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 1.0; d < 1000.0; d += 0.37)
    {
        const double p = ReceivedPower(d, ch);
        ASSERT_NEAR(p / OraclePower(d, ch), 1.0, 1e-12) << d;
        ASSERT_LT(p, prev);
        prev = p;
    }
}

TEST(Channel, FourthPowerLawAboveCrossover)
{
    const auto ch = ChannelParams::Default();
    const double d = ch.CrossoverDistance() * 1.5;
    EXPECT_NEAR(ReceivedPower(d, ch) / ReceivedPower(2 * d, ch), 16.0, 1e-9);
}

TEST(Channel, ContinuousAtCrossover)
{
    const auto ch = ChannelParams::Default();
    const double dc = ch.CrossoverDistance();
    const double free = ch.txPower * ch.txGain * ch.rxGain * ch.wavelength * ch.wavelength /
                        std::pow(4.0 * std::numbers::pi * dc, 2) / ch.systemLoss;
    const double two = ch.txPower * ch.txGain * ch.rxGain * std::pow(ch.txHeight * ch.rxHeight, 2) /
                       std::pow(dc, 4) / ch.systemLoss;
    EXPECT_NEAR(free / two, 1.0, 1e-12);
    EXPECT_NEAR(ReceivedPower(dc * (1 - 1e-12), ch) / ReceivedPower(dc * (1 + 1e-12), ch), 1.0, 1e-9);
}

TEST(Channel, CustomRangesInvert)
{
    for (double r : {100.0, 180.0, 250.0, 400.0})
    {
        const auto ch = ChannelParams::WithRanges(r, 2.2 * r);
        EXPECT_NEAR(Bisect(ch.rxThreshold, ch), r, 1e-6);
        EXPECT_NEAR(RangeForPower(ReceivedPower(r, ch), ch), r, 1e-9);
    }
    EXPECT_THROW(ReceivedPower(Vec2{1, 1}, Vec2{1, 1}, ChannelParams::Default()), std::invalid_argument);
}

TEST(Mobility, ReachesWaypointInOneStep)
{
    RngStream rng(1, "mobility");
    MobilityParams params;
    params.pause = 2.0;
    NodePose pose;
    pose.pos = {0, 0};
    pose.waypoint = {3, 4};
    pose.speed = 5.0;
    pose.moving = true;
    const NodePose next = StepMobility(pose, 0.0, 1.0, params, Area{}, rng);
    EXPECT_NEAR(next.pos.x, 3.0, 1e-9);
    EXPECT_NEAR(next.pos.y, 4.0, 1e-9);
    EXPECT_FALSE(next.moving);
    EXPECT_EQ(next.speed, 0.0);
}

TEST(Mobility, SpeedDrawsStayInRange)
{
    RngStream rng(5, "mobility");
    MobilityParams params;
    for (int i = 0; i < 10000; ++i)
    {
        const NodePose p = InitialPose(0, {250, 200}, 0.0, params, Area{}, rng);
        ASSERT_GE(p.speed, 3.0);
        ASSERT_LE(p.speed, 10.0);
        ASSERT_TRUE(Area{}.Contains(p.waypoint));
    }
}

TEST(Mobility, LongRunStaysInsideArea)
{
    RngStream rng(9, "mobility");
    MobilityParams params;
    params.pause = 0.0;
    NodePose p = InitialPose(0, {0, 400}, 0.0, params, Area{}, rng);
    double t = 0.0;
    for (int i = 0; i < 200000; ++i)
    {
        p = StepMobility(p, t, 0.1, params, Area{}, rng);
        t += 0.1;
        ASSERT_TRUE(Area{}.Contains(p.pos)) << p.pos.x << "," << p.pos.y;
        if (p.moving)
        {
            ASSERT_GE(p.speed, 3.0);
            ASSERT_LE(p.speed, 10.0);
        }
    }
}

TEST(Mobility, StaticNodeNeverMoves)
{
    RngStream rng(1, "mobility");
    MobilityParams params;
    params.isStatic = true;
    NodePose p = InitialPose(0, {10, 20}, 0.0, params, Area{}, rng);
    for (int i = 0; i < 100; ++i)
    {
        p = StepMobility(p, i * 0.1, 0.1, params, Area{}, rng);
    }
    EXPECT_EQ(p.pos, (Vec2{10, 20}));
}

TEST(IfaceQueue, DropTailAtCapacity)
{
    IfaceQueue q(50);
    for (int i = 0; i < 50; ++i)
    {
        ASSERT_TRUE(q.Enqueue(Frame{DataPacket(i, 0, 1), 1}));
    }
    EXPECT_FALSE(q.Enqueue(Frame{DataPacket(50, 0, 1), 1}));
    EXPECT_EQ(q.Size(), 50u);
    EXPECT_EQ(q.Dequeue()->packet.uid, 0);
}

// Model check against a reference list under random interleavings.
TEST(IfaceQueue, FifoModelCheck)
{
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial)
    {
        const std::size_t cap = 1 + gen() % 12;
        IfaceQueue q(cap);
        std::deque<PacketUid> model;
        PacketUid next = 0;
        for (int op = 0; op < 500; ++op)
        {
            if (gen() % 2)
            {
                const bool accepted = q.Enqueue(Frame{DataPacket(next, 0, 1), 1});
                ASSERT_EQ(accepted, model.size() < cap);
                if (accepted)
                {
                    model.push_back(next);
                }
                ++next;
            }
            else
            {
                auto f = q.Dequeue();
                ASSERT_EQ(f.has_value(), !model.empty());
                if (f)
                {
                    ASSERT_EQ(f->packet.uid, model.front());
                    model.pop_front();
                }
            }
            ASSERT_EQ(q.Size(), model.size());
        }
    }
}

TEST(Mac, ReceiverInRangeGetsOneRecord)
{
    RawNet net({{0, 0}, {200, 0}});
    net.world.Enqueue(0, Frame{Bcast(1, 0), kBroadcast});
    net.sim.RunUntil(1.0);
    EXPECT_EQ(net.Count(TraceEvent::Send, Layer::Mac, 0), 1u);
    EXPECT_EQ(net.Count(TraceEvent::Receive, Layer::Mac, 1), 1u);
    ASSERT_EQ(net.agents[1]->received.size(), 1u);
    EXPECT_EQ(net.agents[1]->received[0].second, 0);
}

TEST(Mac, ReceiverOutOfRangeGetsNothing)
{
    RawNet net({{0, 0}, {260, 0}});
    net.world.Enqueue(0, Frame{Bcast(1, 0), kBroadcast});
    net.sim.RunUntil(1.0);
    EXPECT_EQ(net.Count(TraceEvent::Receive, Layer::Mac, 1), 0u);
    EXPECT_TRUE(net.agents[1]->received.empty());
}

TEST(Mac, SimultaneousSendersCollideAtCommonReceiver)
{
    RawNet net({{0, 0}, {200, 0}, {400, 0}});
    net.world.AttemptTransmit(0, Frame{Bcast(1, 0), kBroadcast});
    net.world.AttemptTransmit(2, Frame{Bcast(2, 2), kBroadcast});
    net.sim.RunUntil(1.0);
    EXPECT_EQ(net.Count(TraceEvent::Send, Layer::Mac, 0), 1u);
    EXPECT_EQ(net.Count(TraceEvent::Send, Layer::Mac, 2), 1u);
    EXPECT_EQ(net.Count(TraceEvent::Receive, Layer::Mac, 1), 0u);
    EXPECT_EQ(net.Count(TraceEvent::Drop, Layer::Mac, 1), 2u);
}

TEST(Mac, CarrierSenseDefersSecondSender)
{
    RawNet net({{0, 0}, {200, 0}, {400, 0}});
    net.world.AttemptTransmit(0, Frame{Bcast(1, 0), kBroadcast});
    net.sim.RunUntil(0.0001);
    EXPECT_TRUE(net.world.MediumBusy(2));
    net.world.Enqueue(2, Frame{Bcast(2, 2), kBroadcast});
    net.sim.RunUntil(1.0);
    EXPECT_EQ(net.Count(TraceEvent::Receive, Layer::Mac, 1), 2u);
}

TEST(Mac, UnicastRetriesThenReportsLinkFailure)
{
    RawNet net({{0, 0}, {300, 0}});
    net.world.Enqueue(0, Frame{DataPacket(5, 0, 1), 1});
    net.sim.RunUntil(2.0);
    // One initial attempt plus four retries.
    EXPECT_EQ(net.Count(TraceEvent::Send, Layer::Mac, 0), 5u);
    ASSERT_EQ(net.agents[0]->failed.size(), 1u);
    EXPECT_EQ(net.agents[0]->failed[0].second, 1);
}

TEST(Mac, FullQueueTracesIfqDrop)
{
    RawNet net({{0, 0}, {100, 0}});
    for (int i = 0; i < 60; ++i)
    {
        net.world.Enqueue(0, Frame{DataPacket(i, 0, 1), 1});
    }
    std::size_t ifq = 0;
    for (const auto& l : net.trace.Lines())
    {
        const auto* r = std::get_if<TraceRecord>(&l);
        ifq += r && r->evt == TraceEvent::Drop && r->reason == DropReason::Ifq;
    }
    // One frame is already in the MAC, fifty wait in the queue.
    EXPECT_EQ(ifq, 9u);
}

TEST(Mac, ReceptionIsSymmetric)
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> x(0, 500), y(0, 400);
    std::vector<Vec2> pos;
    for (int i = 0; i < 12; ++i)
    {
        pos.push_back({x(gen), y(gen)});
    }
    RawNet net(pos);
    for (NodeId a = 0; a < 12; ++a)
    {
        for (NodeId b = 0; b < 12; ++b)
        {
            if (a != b)
            {
                ASSERT_EQ(net.world.InRange(a, b), net.world.InRange(b, a));
            }
        }
    }
}

// Trace-level world invariants on mobile runs: receptions follow a MAC send
// of the same uid from a node in range; broadcast outcomes never exceed the
// neighbors in range; mobility samples stay inside the area.
TEST(WorldProperties, MobileRunInvariants)
{
    for (Protocol p : {Protocol::Aodv, Protocol::Dsr, Protocol::Dsdv})
    {
        auto spec = Builtin(3);
        Simulator sim;
        MemoryTrace trace;
        World world(sim, MakeWorldConfig(spec), &trace, 4);
        for (const auto& n : spec.nodes)
        {
            world.AddNode(n.pos, spec.Mobility(n));
        }
        for (NodeId id = 0; id < 10; ++id)
        {
            world.SetRouting(id, MakeAgent(p, world.Services(id)));
        }
        std::map<PacketUid, std::size_t> capacity;
        std::size_t violations = 0;
        world.SetTxObserver([&](NodeId sender, const Frame& f) {
            if (f.nextHop != kBroadcast)
            {
                return;
            }
            for (NodeId r = 0; r < 10; ++r)
            {
                capacity[f.packet.uid] += r != sender && world.InRange(sender, r);
            }
        });
        world.Start();
        for (int i = 0; i < 20; ++i)
        {
            sim.ScheduleAt(1.0 + i, [&world, i] {
                Packet pkt = DataPacket(world.NewUid(), 0, 4, i);
                world.SendFromAgent(0, std::move(pkt));
            });
        }
        sim.RunUntil(40.0);
        ASSERT_FALSE(capacity.empty());

        std::set<PacketUid> sent;
        std::map<PacketUid, std::size_t> outcomes;
        for (const auto& line : trace.Lines())
        {
            if (const auto* m = std::get_if<MobilityRecord>(&line))
            {
                violations += !spec.area.Contains({m->X(), m->Y()});
                continue;
            }
            const auto& r = std::get<TraceRecord>(line);
            if (r.layer != Layer::Mac)
            {
                continue;
            }
            if (r.evt == TraceEvent::Send)
            {
                sent.insert(r.uid);
            }
            else if (r.evt == TraceEvent::Receive)
            {
                violations += !sent.contains(r.uid);
            }
            if (r.dst == kBroadcast &&
                (r.evt == TraceEvent::Receive || (r.evt == TraceEvent::Drop && r.reason == DropReason::Col)))
            {
                ++outcomes[r.uid];
            }
        }
        ASSERT_GT(sent.size(), 20u);
        for (const auto& [uid, n] : outcomes)
        {
            violations += n > capacity[uid];
        }
        EXPECT_EQ(violations, 0u) << ToString(p);
    }
}
