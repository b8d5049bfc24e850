#include "visim/aodv.h"

#include <algorithm>

namespace visim
{

AodvAgent::AodvAgent(NodeServices& node, AodvConfig cfg)
    : m_node(node),
      m_cfg(cfg),
      m_buffer(cfg.sendBufferPerDestination, cfg.sendBufferTimeout)
{
}

void
AodvAgent::Start()
{
    m_node.After(1.0, [this] { Housekeeping(); });
}

void
AodvAgent::Housekeeping()
{
    for (auto& p : m_buffer.Expire(m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, p, DropReason::Nrte);
    }
    m_node.After(1.0, [this] { Housekeeping(); });
}

const AodvEntry*
AodvAgent::Find(NodeId dest) const
{
    auto it = m_table.find(dest);
    return it == m_table.end() ? nullptr : &it->second;
}

void
AodvAgent::UpdateRoute(NodeId dest, NodeId nextHop, uint32_t hops, uint32_t seq, bool seqValid)
{
    const double now = m_node.Now();
    const double expiry = now + m_cfg.activeRouteTimeout;
    auto it = m_table.find(dest);
    if (it == m_table.end())
    {
        AodvEntry e;
        e.dest = dest;
        e.nextHop = nextHop;
        e.hops = hops;
        e.seq = seq;
        e.seqValid = seqValid;
        e.valid = true;
        e.expiry = expiry;
        m_table.emplace(dest, e);
        return;
    }
    auto& e = it->second;
    const bool fresher = seqValid && (!e.seqValid || seq > e.seq);
    const bool shorter = seqValid && e.seqValid && seq == e.seq && hops < e.hops;
    if (fresher || shorter || !e.Usable(now))
    {
        e.nextHop = nextHop;
        e.hops = hops;
        if (seqValid)
        {
            e.seq = seq;
            e.seqValid = true;
        }
        e.valid = true;
        e.expiry = expiry;
        return;
    }
    if (e.nextHop == nextHop)
    {
        e.expiry = std::max(e.expiry, expiry);
    }
}

void
AodvAgent::Refresh(NodeId dest)
{
    auto it = m_table.find(dest);
    if (it != m_table.end() && it->second.valid)
    {
        it->second.expiry = std::max(it->second.expiry, m_node.Now() + m_cfg.activeRouteTimeout);
    }
}

void
AodvAgent::Send(Packet pkt)
{
    m_node.Trace(TraceEvent::Send, pkt);
    Originate(std::move(pkt));
}

void
AodvAgent::Originate(Packet pkt)
{
    if (pkt.dst == m_node.Self())
    {
        m_node.DeliverUp(pkt);
        return;
    }
    auto it = m_table.find(pkt.dst);
    if (it != m_table.end() && it->second.Usable(m_node.Now()))
    {
        Refresh(pkt.dst);
        const NodeId next = it->second.nextHop;
        m_node.SendFrame(std::move(pkt), next);
        return;
    }
    const NodeId dst = pkt.dst;
    Buffer(std::move(pkt));
    StartDiscovery(dst);
}

void
AodvAgent::Buffer(Packet pkt)
{
    if (auto evicted = m_buffer.Add(std::move(pkt), m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, *evicted, DropReason::Ifq);
    }
}

void
AodvAgent::StartDiscovery(NodeId dst)
{
    if (m_discoveries.contains(dst))
    {
        return;
    }
    Discovery d;
    d.wait = m_cfg.rreqWaitInitial;
    d.generation = ++m_generation;
    SendRreq(dst);
    m_node.After(d.wait, [this, dst, gen = d.generation] { DiscoveryTimeout(dst, gen); });
    m_discoveries.emplace(dst, d);
}

void
AodvAgent::DiscoveryTimeout(NodeId dst, uint64_t generation)
{
    auto it = m_discoveries.find(dst);
    if (it == m_discoveries.end() || it->second.generation != generation)
    {
        return;
    }
    const auto* e = Find(dst);
    if (e && e->Usable(m_node.Now()))
    {
        m_discoveries.erase(it);
        FlushBuffer();
        return;
    }
    if (!m_buffer.Has(dst))
    {
        m_discoveries.erase(it);
        return;
    }
    if (it->second.retries >= m_cfg.rreqRetries)
    {
        m_discoveries.erase(it);
        for (auto& p : m_buffer.Take(dst))
        {
            m_node.Trace(TraceEvent::Drop, p, DropReason::Nrte);
        }
        return;
    }
    ++it->second.retries;
    it->second.wait *= 2.0;
    SendRreq(dst);
    m_node.After(it->second.wait, [this, dst, generation] { DiscoveryTimeout(dst, generation); });
}

void
AodvAgent::SendRreq(NodeId dst)
{
    ++m_seq;
    AodvRreqPayload p;
    p.origin = m_node.Self();
    p.originSeq = m_seq;
    p.rreqId = ++m_rreqId;
    p.target = dst;
    if (const auto* e = Find(dst); e && e->seqValid)
    {
        p.targetSeq = e->seq;
        p.targetSeqKnown = true;
    }
    p.hopCount = 0;
    m_seen.emplace(p.origin, p.rreqId);
    Packet pkt = MakeControlPacket(m_node, PacketClass::Rreq, dst, p);
    m_node.Trace(TraceEvent::Send, pkt);
    m_node.SendFrame(std::move(pkt), kBroadcast);
}

void
AodvAgent::Receive(Packet pkt, NodeId from)
{
    switch (pkt.cls)
    {
    case PacketClass::Rreq:
        OnRreq(std::move(pkt), from);
        return;
    case PacketClass::Rrep:
        OnRrep(std::move(pkt), from);
        return;
    case PacketClass::Rerr:
        OnRerr(std::move(pkt), from);
        return;
    case PacketClass::Data:
    case PacketClass::Ack:
        ForwardTransport(std::move(pkt), from);
        return;
    case PacketClass::Update:
        return;
    }
}

void
AodvAgent::OnRreq(Packet pkt, NodeId from)
{
    auto* p = std::get_if<AodvRreqPayload>(&pkt.payload);
    const NodeId self = m_node.Self();
    if (!p || p->origin == self)
    {
        return;
    }
    const RreqKey key{p->origin, p->rreqId};
    if (m_seen.contains(key))
    {
        return;
    }
    m_seen.insert(key);

    const uint32_t hops = p->hopCount + 1;
    UpdateRoute(p->origin, from, hops, p->originSeq, true);

    if (p->target == self)
    {
        if (p->targetSeqKnown && p->targetSeq > m_seq)
        {
            m_seq = p->targetSeq;
        }
        AodvRrepPayload r;
        r.origin = p->origin;
        r.target = self;
        r.targetSeq = m_seq;
        r.hopCount = 0;
        Packet rep = MakeControlPacket(m_node, PacketClass::Rrep, p->origin, r);
        m_node.Trace(TraceEvent::Send, rep);
        m_node.SendFrame(std::move(rep), from);
        return;
    }

    auto it = m_table.find(p->target);
    if (it != m_table.end() && it->second.Usable(m_node.Now()) && it->second.seqValid &&
        (!p->targetSeqKnown || it->second.seq >= p->targetSeq))
    {
        auto& fwd = it->second;
        fwd.precursors.insert(from);
        if (auto rev = m_table.find(p->origin); rev != m_table.end())
        {
            rev->second.precursors.insert(fwd.nextHop);
        }
        AodvRrepPayload r;
        r.origin = p->origin;
        r.target = p->target;
        r.targetSeq = fwd.seq;
        r.hopCount = fwd.hops;
        Packet rep = MakeControlPacket(m_node, PacketClass::Rrep, p->origin, r);
        rep.src = p->target;
        m_node.Trace(TraceEvent::Send, rep);
        m_node.SendFrame(std::move(rep), from);
        return;
    }

    p->hopCount = hops;
    m_node.Trace(TraceEvent::Forward, pkt);
    const double jitter = m_node.Rng().Uniform(0.0, kBroadcastJitter);
    m_node.After(jitter, [this, pkt = std::move(pkt)]() mutable {
        m_node.SendFrame(std::move(pkt), kBroadcast);
    });
}

void
AodvAgent::OnRrep(Packet pkt, NodeId from)
{
    auto* p = std::get_if<AodvRrepPayload>(&pkt.payload);
    if (!p)
    {
        return;
    }
    const NodeId self = m_node.Self();
    const uint32_t hops = p->hopCount + 1;
    UpdateRoute(p->target, from, hops, p->targetSeq, true);
    if (p->origin == self)
    {
        m_discoveries.erase(p->target);
        FlushBuffer();
        return;
    }
    auto rev = m_table.find(p->origin);
    if (rev == m_table.end() || !rev->second.Usable(m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, pkt, DropReason::Nrte);
        return;
    }
    const NodeId back = rev->second.nextHop;
    m_table[p->target].precursors.insert(back);
    rev->second.precursors.insert(from);
    p->hopCount = hops;
    m_node.Trace(TraceEvent::Forward, pkt);
    m_node.SendFrame(std::move(pkt), back);
}

void
AodvAgent::ForwardTransport(Packet pkt, NodeId from)
{
    const NodeId self = m_node.Self();
    Refresh(pkt.src);
    if (pkt.dst == self)
    {
        m_node.DeliverUp(pkt);
        return;
    }
    auto it = m_table.find(pkt.dst);
    if (it == m_table.end() || !it->second.Usable(m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, pkt, DropReason::Nrte);
        uint32_t seq = 0;
        if (it != m_table.end())
        {
            seq = it->second.seq;
        }
        SendRerr(from, {{pkt.dst, seq}});
        return;
    }
    it->second.precursors.insert(from);
    Refresh(pkt.dst);
    const NodeId next = it->second.nextHop;
    m_node.Trace(TraceEvent::Forward, pkt);
    m_node.SendFrame(std::move(pkt), next);
}

void
AodvAgent::SendRerr(NodeId to, std::vector<AodvRerrPayload::Unreachable> list)
{
    if (list.empty())
    {
        return;
    }
    AodvRerrPayload p;
    p.unreachable = std::move(list);
    Packet pkt = MakeControlPacket(m_node, PacketClass::Rerr, to, std::move(p));
    m_node.Trace(TraceEvent::Send, pkt);
    m_node.SendFrame(std::move(pkt), to);
}

void
AodvAgent::Propagate(const std::vector<std::pair<AodvRerrPayload::Unreachable, std::set<NodeId>>>& lost)
{
    std::map<NodeId, std::vector<AodvRerrPayload::Unreachable>> perPrecursor;
    for (const auto& [u, precursors] : lost)
    {
        for (NodeId p : precursors)
        {
            perPrecursor[p].push_back(u);
        }
    }
    for (auto& [to, list] : perPrecursor)
    {
        SendRerr(to, std::move(list));
    }
}

void
AodvAgent::LinkFailed(Packet pkt, NodeId nextHop)
{
    std::vector<std::pair<AodvRerrPayload::Unreachable, std::set<NodeId>>> lost;
    for (auto& [dest, e] : m_table)
    {
        if (!e.valid || e.nextHop != nextHop)
        {
            continue;
        }
        e.valid = false;
        if (e.seqValid)
        {
            ++e.seq;
        }
        lost.push_back({{dest, e.seq}, e.precursors});
        e.precursors.clear();
    }
    Propagate(lost);

    const bool transport = pkt.cls == PacketClass::Data || pkt.cls == PacketClass::Ack;
    if (transport && pkt.src == m_node.Self())
    {
        const NodeId dst = pkt.dst;
        Buffer(std::move(pkt));
        StartDiscovery(dst);
        return;
    }
    m_node.Trace(TraceEvent::Drop, pkt, DropReason::Cbk);
}

void
AodvAgent::OnRerr(Packet pkt, NodeId from)
{
    auto* p = std::get_if<AodvRerrPayload>(&pkt.payload);
    if (!p)
    {
        return;
    }
    std::vector<std::pair<AodvRerrPayload::Unreachable, std::set<NodeId>>> lost;
    std::vector<NodeId> pending;
    for (const auto& u : p->unreachable)
    {
        auto it = m_table.find(u.dest);
        if (it == m_table.end() || !it->second.valid || it->second.nextHop != from)
        {
            continue;
        }
        auto& e = it->second;
        e.valid = false;
        e.seq = std::max(e.seq, u.seq);
        lost.push_back({{u.dest, e.seq}, e.precursors});
        e.precursors.clear();
        if (m_buffer.Has(u.dest))
        {
            pending.push_back(u.dest);
        }
    }
    Propagate(lost);
    for (NodeId dst : pending)
    {
        StartDiscovery(dst);
    }
}

void
AodvAgent::FlushBuffer()
{
    const double now = m_node.Now();
    for (NodeId dst : m_buffer.Destinations())
    {
        auto it = m_table.find(dst);
        if (it == m_table.end() || !it->second.Usable(now))
        {
            continue;
        }
        m_discoveries.erase(dst);
        const NodeId next = it->second.nextHop;
        for (auto& p : m_buffer.Take(dst))
        {
            m_node.SendFrame(std::move(p), next);
        }
        Refresh(dst);
    }
}

} // namespace visim
