#include "test_support.h"

#include "visim/aodv.h"

#include <gtest/gtest.h>

#include <random>

using namespace visim;
using namespace visim::test;

namespace
{

Packet
Rreq(NodeId origin, uint32_t id, NodeId target, uint32_t hopCount, uint32_t originSeq = 1)
{
    AodvRreqPayload p;
    p.origin = origin;
    p.originSeq = originSeq;
    p.rreqId = id;
    p.target = target;
    p.hopCount = hopCount;
    return Control(PacketClass::Rreq, origin, target, p);
}

Packet
Rrep(NodeId origin, NodeId target, uint32_t targetSeq, uint32_t hopCount)
{
    return Control(PacketClass::Rrep, target, origin, AodvRrepPayload{origin, target, targetSeq, hopCount});
}

struct AodvFixture
{
    Simulator sim;
    FakeNode node;
    AodvAgent agent;

    explicit AodvFixture(NodeId self)
        : node(sim, self),
          agent(node)
    {
        agent.Start();
    }

    void Route(NodeId dest, NodeId next, uint32_t hops, std::set<NodeId> precursors = {})
    {
        AodvEntry e;
        e.dest = dest;
        e.nextHop = next;
        e.hops = hops;
        e.seq = 2;
        e.seqValid = true;
        e.valid = true;
        e.expiry = sim.Now() + 10.0;
        e.precursors = std::move(precursors);
        agent.InstallRoute(e);
    }
};

} // namespace

TEST(AodvOriginate, ValidEntryUnicasts)
{
    AodvFixture f(0);
    f.Route(2, 1, 2);
    f.agent.Send(DataPacket(1, 0, 2));
    ASSERT_EQ(f.node.sent.size(), 1u);
    EXPECT_EQ(f.node.sent[0].nextHop, 1);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rreq).empty());
}

TEST(AodvOriginate, NoEntryBroadcastsRreq)
{
    AodvFixture f(0);
    f.agent.Send(DataPacket(1, 0, 2));
    const auto rreqs = f.node.SentOfClass(PacketClass::Rreq);
    ASSERT_EQ(rreqs.size(), 1u);
    EXPECT_EQ(rreqs[0].nextHop, kBroadcast);
    const auto& p = std::get<AodvRreqPayload>(rreqs[0].pkt.payload);
    EXPECT_EQ(p.origin, 0);
    EXPECT_EQ(p.target, 2);
    EXPECT_EQ(p.hopCount, 0u);
    EXPECT_EQ(f.agent.Buffer().Count(2), 1u);
    EXPECT_TRUE(f.agent.Seen({0, p.rreqId}));
}

TEST(AodvOriginate, SelfDeliveredLocally)
{
    AodvFixture f(0);
    f.agent.Send(DataPacket(1, 0, 0));
    EXPECT_TRUE(f.node.sent.empty());
    EXPECT_EQ(f.node.delivered.size(), 1u);
}

TEST(AodvOriginate, ExpiredEntryRediscovers)
{
    AodvFixture f(0);
    f.Route(2, 1, 2);
    f.sim.RunUntil(11.0);
    f.agent.Send(DataPacket(1, 0, 2));
    EXPECT_EQ(f.node.SentOfClass(PacketClass::Rreq).size(), 1u);
}

TEST(AodvOriginate, UnansweredDiscoveryGivesUp)
{
    AodvFixture f(0);
    f.agent.Send(DataPacket(1, 0, 2));
    f.sim.RunUntil(20.0);
    // First try plus two retries, then the buffered packet is dropped.
    EXPECT_EQ(f.node.SentOfClass(PacketClass::Rreq).size(), 3u);
    EXPECT_EQ(f.node.Drops(DropReason::Nrte), 1u);
    EXPECT_FALSE(f.agent.DiscoveryActive(2));
}

TEST(AodvRreq, DuplicateDiscardedWithoutStateChange)
{
    AodvFixture f(2);
    f.agent.Receive(Rreq(0, 7, 5, 1), 1);
    const auto before = f.agent.Table();
    f.agent.Receive(Rreq(0, 7, 5, 0), 0);
    f.sim.RunUntil(0.5);
    EXPECT_EQ(f.node.SentOfClass(PacketClass::Rreq).size(), 1u);
    ASSERT_EQ(f.agent.Table().size(), before.size());
    EXPECT_EQ(f.agent.Find(0)->nextHop, 1);
    EXPECT_EQ(f.agent.Find(0)->hops, 2u);
}

TEST(AodvRreq, FirstCopyInstallsReversePath)
{
    AodvFixture f(2);
    f.agent.Receive(Rreq(0, 1, 5, 1), 1);
    const auto* e = f.agent.Find(0);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->nextHop, 1);
    EXPECT_EQ(e->hops, 2u);
    f.sim.RunUntil(0.5);
    const auto fwd = f.node.SentOfClass(PacketClass::Rreq);
    ASSERT_EQ(fwd.size(), 1u);
    EXPECT_EQ(std::get<AodvRreqPayload>(fwd[0].pkt.payload).hopCount, 2u);
}

TEST(AodvRreq, TargetRepliesAlongReversePath)
{
    AodvFixture f(2);
    f.agent.Receive(Rreq(0, 1, 2, 1), 1);
    const auto reps = f.node.SentOfClass(PacketClass::Rrep);
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_EQ(reps[0].nextHop, 1);
    EXPECT_EQ(std::get<AodvRrepPayload>(reps[0].pkt.payload).hopCount, 0u);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rreq).empty());
}

TEST(AodvRreq, FreshIntermediateReplies)
{
    AodvFixture f(1);
    f.Route(3, 2, 2);
    auto req = Rreq(0, 1, 3, 0);
    std::get<AodvRreqPayload>(req.payload).targetSeq = 2;
    std::get<AodvRreqPayload>(req.payload).targetSeqKnown = true;
    f.agent.Receive(req, 0);
    const auto reps = f.node.SentOfClass(PacketClass::Rrep);
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_EQ(std::get<AodvRrepPayload>(reps[0].pkt.payload).hopCount, 2u);
}

TEST(AodvRreq, StaleIntermediateForwards)
{
    AodvFixture f(1);
    f.Route(3, 2, 2);
    auto req = Rreq(0, 1, 3, 0);
    std::get<AodvRreqPayload>(req.payload).targetSeq = 5;
    std::get<AodvRreqPayload>(req.payload).targetSeqKnown = true;
    f.agent.Receive(req, 0);
    f.sim.RunUntil(0.5);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rrep).empty());
    EXPECT_EQ(f.node.SentOfClass(PacketClass::Rreq).size(), 1u);
}

TEST(AodvRrep, RelayInstallsForwardEntry)
{
    // B(1) relays C's reply toward A(0).
    AodvFixture f(1);
    f.agent.Receive(Rreq(0, 1, 2, 0), 0);
    f.agent.Receive(Rrep(0, 2, 1, 0), 2);
    const auto* e = f.agent.Find(2);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->nextHop, 2);
    EXPECT_EQ(e->hops, 1u);
    const auto reps = f.node.SentOfClass(PacketClass::Rrep);
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_EQ(reps[0].nextHop, 0);
    EXPECT_EQ(std::get<AodvRrepPayload>(reps[0].pkt.payload).hopCount, 1u);
}

TEST(AodvRrep, OriginFlushesBuffer)
{
    AodvFixture f(0);
    for (PacketUid u = 1; u <= 3; ++u)
    {
        f.agent.Send(DataPacket(u, 0, 2));
    }
    f.agent.Receive(Rrep(0, 2, 1, 1), 1);
    const auto data = f.node.SentOfClass(PacketClass::Data);
    ASSERT_EQ(data.size(), 3u);
    for (const auto& d : data)
    {
        EXPECT_EQ(d.nextHop, 1);
    }
    EXPECT_EQ(f.agent.Find(2)->hops, 2u);
    EXPECT_FALSE(f.agent.DiscoveryActive(2));
}

TEST(AodvRrep, ExpiredReverseRouteDropsReply)
{
    AodvFixture f(1);
    f.agent.Receive(Rreq(0, 1, 2, 0), 0);
    f.sim.RunUntil(11.0);
    f.agent.Receive(Rrep(0, 2, 1, 0), 2);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rrep).empty());
    EXPECT_EQ(f.node.Drops(DropReason::Nrte), 1u);
}

TEST(AodvLine, ThreeNodeDiscovery)
{
    StaticNet net({{50, 200}, {250, 200}, {450, 200}}, Protocol::Aodv);
    net.sim.ScheduleAt(1.0, [&] { net.SendData(0, 2); });
    net.RunUntil(3.0);
    const auto* a = net.As<AodvAgent>(0).Find(2);
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->nextHop, 1);
    EXPECT_EQ(a->hops, 2u);
    const auto* b = net.As<AodvAgent>(1).Find(2);
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(b->nextHop, 2);
    EXPECT_EQ(b->hops, 1u);
    EXPECT_EQ(net.delivered[2].size(), 1u);
    // The reply went C -> B -> A.
    std::vector<NodeId> rrepSenders;
    for (const auto& r : net.Records())
    {
        if (r.cls == PacketClass::Rrep && r.layer == Layer::Mac && r.evt == TraceEvent::Send)
        {
            rrepSenders.push_back(r.node);
        }
    }
    EXPECT_EQ(rrepSenders, (std::vector<NodeId>{2, 1}));
}

TEST(AodvBreak, RerrTravelsToSourceWhichRediscovers)
{
    // Chain A(0)-B(1)-C(2)-D(3); D leaves at t=5 while A keeps sending.
    StaticNet net({{20, 200}, {170, 200}, {320, 200}, {470, 200}}, Protocol::Aodv, 1, 160.0);
    for (int i = 0; i < 20; ++i)
    {
        net.sim.ScheduleAt(1.0 + 0.5 * i, [&net, i] { net.SendData(0, 3, i); });
    }
    net.sim.ScheduleAt(5.0, [&] { net.world.Teleport(3, {470, 10}); });
    net.RunUntil(12.0);
    ASSERT_GT(net.delivered[3].size(), 3u);
    std::vector<std::pair<NodeId, Micros>> rerr;
    Micros firstRreqAfterBreak = -1;
    for (const auto& r : net.Records())
    {
        if (r.layer != Layer::Mac || r.evt != TraceEvent::Send)
        {
            continue;
        }
        if (r.cls == PacketClass::Rerr)
        {
            rerr.push_back({r.node, r.time});
        }
        if (r.cls == PacketClass::Rreq && r.node == 0 && r.time > ToMicros(5.0) && firstRreqAfterBreak < 0)
        {
            firstRreqAfterBreak = r.time;
        }
    }
    ASSERT_GE(rerr.size(), 2u);
    EXPECT_EQ(rerr[0].first, 2);
    EXPECT_EQ(rerr[1].first, 1);
    EXPECT_GT(firstRreqAfterBreak, rerr[1].second);
}

TEST(AodvBreak, NoPendingTrafficNoRediscovery)
{
    AodvFixture f(0);
    f.Route(2, 1, 2);
    f.agent.Send(DataPacket(1, 0, 2));
    Packet rerr = Control(PacketClass::Rerr, 1, 0, AodvRerrPayload{{{2, 3}}});
    f.agent.Receive(rerr, 1);
    EXPECT_FALSE(f.agent.Find(2)->valid);
    EXPECT_EQ(f.agent.Find(2)->seq, 3u);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rreq).empty());
}

TEST(AodvBreak, UnrelatedNeighborNoRerr)
{
    AodvFixture f(1);
    f.Route(3, 2, 2, {0});
    f.agent.LinkFailed(Control(PacketClass::Rrep, 1, 4, AodvRrepPayload{}), 4);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Rerr).empty());
    EXPECT_TRUE(f.agent.Find(3)->valid);
}

TEST(AodvBreak, RerrSentToPrecursorsOnly)
{
    AodvFixture f(2);
    f.Route(3, 3, 1, {1});
    f.Route(4, 3, 2, {});
    f.agent.LinkFailed(DataPacket(1, 0, 3), 3);
    const auto errs = f.node.SentOfClass(PacketClass::Rerr);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs[0].nextHop, 1);
    const auto& list = std::get<AodvRerrPayload>(errs[0].pkt.payload).unreachable;
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].dest, 3);
    EXPECT_FALSE(f.agent.Find(4)->valid);
}

TEST(AodvBreak, NoForwardOverInvalidEntry)
{
    AodvFixture f(1);
    f.Route(3, 2, 2, {0});
    f.agent.LinkFailed(DataPacket(1, 0, 3), 2);
    f.node.sent.clear();
    f.agent.Receive(DataPacket(2, 0, 3), 0);
    EXPECT_TRUE(f.node.SentOfClass(PacketClass::Data).empty());
    EXPECT_EQ(f.node.Drops(DropReason::Nrte), 1u);
    EXPECT_EQ(f.node.SentOfClass(PacketClass::Rerr).size(), 1u);
}

// Copies of one request arriving from random neighbors in random order:
// the reverse entry always points at the first sender and later copies
// change nothing.
TEST(AodvProperty, ReversePathFromFirstCopy)
{
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 200; ++trial)
    {
        AodvFixture f(9);
        const int copies = 1 + static_cast<int>(gen() % 5);
        NodeId first = 0;
        uint32_t firstHops = 0;
        for (int c = 0; c < copies; ++c)
        {
            const NodeId from = static_cast<NodeId>(1 + gen() % 6);
            const uint32_t hc = static_cast<uint32_t>(gen() % 4);
            if (c == 0)
            {
                first = from;
                firstHops = hc + 1;
            }
            f.agent.Receive(Rreq(0, 4, 8, hc), from);
        }
        f.sim.RunUntil(0.5);
        ASSERT_EQ(f.agent.Find(0)->nextHop, first);
        ASSERT_EQ(f.agent.Find(0)->hops, firstHops);
        ASSERT_EQ(f.node.SentOfClass(PacketClass::Rreq).size(), 1u);
    }
}

// On random static graphs of up to six nodes: each node forwards each
// request at most once and a single discovery installs a loop-free route
// with the brute-force shortest hop count.
TEST(AodvProperty, DiscoveryOnRandomGraphs)
{
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> x(0, 500), y(0, 400);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial)
    {
        const std::size_t n = 3 + gen() % 4;
        std::vector<Vec2> pos;
        for (std::size_t i = 0; i < n; ++i)
        {
            pos.push_back({x(gen), y(gen)});
        }
        const NodeId s = static_cast<NodeId>(gen() % n);
        const NodeId d = static_cast<NodeId>((s + 1 + gen() % (n - 1)) % n);
        StaticNet net(pos, Protocol::Aodv, trial + 1);
        std::map<std::tuple<NodeId, NodeId, uint32_t>, int> forwards;
        net.world.SetTxObserver([&](NodeId sender, const Frame& f) {
            if (const auto* r = std::get_if<AodvRreqPayload>(&f.packet.payload))
            {
                if (sender != r->origin)
                {
                    ++forwards[{sender, r->origin, r->rreqId}];
                }
            }
        });
        net.sim.ScheduleAt(1.0, [&] { net.SendData(s, d); });
        net.RunUntil(4.0);
        for (const auto& [key, count] : forwards)
        {
            EXPECT_EQ(count, 1) << "trial " << trial;
        }
        const auto dist = BfsHops(Adjacency(pos, 250.0), s)[d];
        const auto* e = net.As<AodvAgent>(s).Find(d);
        if (!dist)
        {
            EXPECT_TRUE(!e || !e->valid);
            continue;
        }
        ASSERT_TRUE(e && e->valid) << "trial " << trial;
        EXPECT_EQ(e->hops, *dist) << "trial " << trial;
        std::set<NodeId> visited{s};
        NodeId at = s;
        while (at != d)
        {
            const auto* hop = net.As<AodvAgent>(at).Find(d);
            ASSERT_TRUE(hop && hop->valid) << "trial " << trial;
            ASSERT_TRUE(visited.insert(hop->nextHop).second) << "loop in trial " << trial;
            at = hop->nextHop;
        }
        EXPECT_EQ(visited.size() - 1, *dist);
        EXPECT_EQ(net.delivered[d].size(), 1u);
        ++checked;
    }
    EXPECT_GT(checked, 15);
}
