#include "visim/dsr.h"

#include <algorithm>

namespace visim
{

bool
IsSimpleRoute(const Route& route)
{
    std::set<NodeId> seen;
    for (NodeId n : route)
    {
        if (!seen.insert(n).second)
        {
            return false;
        }
    }
    return true;
}

RouteCache::RouteCache(NodeId self, std::size_t maxPerDestination)
    : m_self(self),
      m_maxPerDestination(maxPerDestination)
{
}

bool
RouteCache::Add(const Route& route, double now)
{
    if (route.size() < 2 || route.front() != m_self || !IsSimpleRoute(route))
    {
        return false;
    }
    for (std::size_t len = 2; len <= route.size(); ++len)
    {
        AddOne(Route(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(len)), now);
    }
    return true;
}

void
RouteCache::AddOne(const Route& route, double now)
{
    auto& list = m_routes[route.back()];
    for (auto& r : list)
    {
        if (r.nodes == route)
        {
            r.installTime = now;
            return;
        }
    }
    if (list.size() >= m_maxPerDestination)
    {
        // Evict the oldest route.
        auto oldest = std::min_element(list.begin(), list.end(), [](const auto& a, const auto& b) {
            return a.installTime < b.installTime;
        });
        list.erase(oldest);
    }
    list.push_back(CachedRoute{route, now});
}

std::optional<Route>
RouteCache::Find(NodeId dst) const
{
    auto it = m_routes.find(dst);
    if (it == m_routes.end() || it->second.empty())
    {
        return std::nullopt;
    }
    const CachedRoute* best = nullptr;
    for (const auto& r : it->second)
    {
        if (!best || r.nodes.size() < best->nodes.size() ||
            (r.nodes.size() == best->nodes.size() && r.installTime > best->installTime))
        {
            best = &r;
        }
    }
    return best->nodes;
}

std::size_t
RouteCache::RemoveLink(NodeId u, NodeId v)
{
    std::size_t removed = 0;
    auto usesLink = [u, v](const CachedRoute& r) {
        for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i)
        {
            const NodeId a = r.nodes[i];
            const NodeId b = r.nodes[i + 1];
            if ((a == u && b == v) || (a == v && b == u))
            {
                return true;
            }
        }
        return false;
    };
    for (auto it = m_routes.begin(); it != m_routes.end();)
    {
        auto& list = it->second;
        const auto before = list.size();
        std::erase_if(list, usesLink);
        removed += before - list.size();
        it = list.empty() ? m_routes.erase(it) : std::next(it);
    }
    return removed;
}

std::vector<CachedRoute>
RouteCache::Routes(NodeId dst) const
{
    auto it = m_routes.find(dst);
    return it == m_routes.end() ? std::vector<CachedRoute>{} : it->second;
}

std::size_t
RouteCache::Size() const
{
    std::size_t n = 0;
    for (const auto& [dst, list] : m_routes)
    {
        n += list.size();
    }
    return n;
}

// ---------------------------------------------------------------------------

DsrAgent::DsrAgent(NodeServices& node, DsrConfig cfg)
    : m_node(node),
      m_cfg(cfg),
      m_cache(node.Self()),
      m_buffer(cfg.sendBufferPerDestination, cfg.sendBufferTimeout)
{
}

void
DsrAgent::Start()
{
    m_node.After(1.0, [this] { Housekeeping(); });
}

void
DsrAgent::Housekeeping()
{
    for (auto& p : m_buffer.Expire(m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, p, DropReason::Nrte);
    }
    m_node.After(1.0, [this] { Housekeeping(); });
}

void
DsrAgent::Buffer(Packet pkt)
{
    if (auto evicted = m_buffer.Add(std::move(pkt), m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, *evicted, DropReason::Ifq);
    }
}

void
DsrAgent::Send(Packet pkt)
{
    m_node.Trace(TraceEvent::Send, pkt);
    Originate(std::move(pkt));
}

void
DsrAgent::Originate(Packet pkt)
{
    if (pkt.dst == m_node.Self())
    {
        m_node.DeliverUp(pkt);
        return;
    }
    if (auto route = m_cache.Find(pkt.dst))
    {
        SendSourceRouted(std::move(pkt), *route);
        return;
    }
    const NodeId dst = pkt.dst;
    Buffer(std::move(pkt));
    StartDiscovery(dst);
}

void
DsrAgent::SendSourceRouted(Packet pkt, const Route& route)
{
    pkt.sourceRoute = route;
    pkt.routeIndex = 0;
    const NodeId next = route.at(1);
    m_node.SendFrame(std::move(pkt), next);
}

void
DsrAgent::ForwardSourceRouted(Packet pkt)
{
    const std::size_t idx = pkt.routeIndex;
    if (idx + 1 >= pkt.sourceRoute.size())
    {
        m_node.Trace(TraceEvent::Drop, pkt, DropReason::Nrte);
        return;
    }
    const NodeId next = pkt.sourceRoute[idx + 1];
    m_node.Trace(TraceEvent::Forward, pkt);
    m_node.SendFrame(std::move(pkt), next);
}

void
DsrAgent::StartDiscovery(NodeId dst)
{
    if (m_discoveries.contains(dst))
    {
        return;
    }
    Discovery d;
    d.backoff = m_cfg.requestBackoffInitial;
    d.generation = ++m_generation;
    SendRreq(dst);
    m_node.After(d.backoff, [this, dst, gen = d.generation] { RetryDiscovery(dst, gen); });
    m_discoveries.emplace(dst, d);
}

void
DsrAgent::RetryDiscovery(NodeId dst, uint64_t generation)
{
    auto it = m_discoveries.find(dst);
    if (it == m_discoveries.end() || it->second.generation != generation)
    {
        return;
    }
    if (!m_buffer.Has(dst))
    {
        m_discoveries.erase(it);
        return;
    }
    if (m_cache.Find(dst))
    {
        m_discoveries.erase(it);
        FlushBuffer();
        return;
    }
    SendRreq(dst);
    it->second.backoff = std::min(it->second.backoff * 2.0, m_cfg.requestBackoffMax);
    m_node.After(it->second.backoff, [this, dst, generation] { RetryDiscovery(dst, generation); });
}

void
DsrAgent::SendRreq(NodeId dst)
{
    DsrRreqPayload p;
    p.target = dst;
    p.requestId = ++m_requestId;
    p.record = {m_node.Self()};
    m_seen.emplace(m_node.Self(), p.requestId);
    Packet pkt = MakeControlPacket(m_node, PacketClass::Rreq, dst, std::move(p));
    m_node.Trace(TraceEvent::Send, pkt);
    m_node.SendFrame(std::move(pkt), kBroadcast);
}

void
DsrAgent::Receive(Packet pkt, NodeId from)
{
    switch (pkt.cls)
    {
    case PacketClass::Rreq:
        OnRreq(std::move(pkt), from);
        return;
    case PacketClass::Rrep:
        ++pkt.routeIndex;
        OnRrep(std::move(pkt));
        return;
    case PacketClass::Rerr:
        ++pkt.routeIndex;
        OnRerr(std::move(pkt));
        return;
    case PacketClass::Data:
    case PacketClass::Ack: {
        ++pkt.routeIndex;
        const NodeId self = m_node.Self();
        if (pkt.routeIndex >= pkt.sourceRoute.size() || pkt.sourceRoute[pkt.routeIndex] != self)
        {
            m_node.Trace(TraceEvent::Drop, pkt, DropReason::Nrte);
            return;
        }
        // The traversed prefix, reversed, is a route back to the source.
        Route back(pkt.sourceRoute.rend() - static_cast<std::ptrdiff_t>(pkt.routeIndex) - 1,
                   pkt.sourceRoute.rend());
        m_cache.Add(back, m_node.Now());
        if (pkt.dst == self)
        {
            m_node.DeliverUp(pkt);
            return;
        }
        Route ahead(pkt.sourceRoute.begin() + static_cast<std::ptrdiff_t>(pkt.routeIndex),
                    pkt.sourceRoute.end());
        m_cache.Add(ahead, m_node.Now());
        ForwardSourceRouted(std::move(pkt));
        return;
    }
    case PacketClass::Update:
        return;
    }
}

void
DsrAgent::OnRreq(Packet pkt, NodeId /*from*/)
{
    auto* p = std::get_if<DsrRreqPayload>(&pkt.payload);
    if (!p)
    {
        return;
    }
    const NodeId self = m_node.Self();
    const auto key = std::make_pair(pkt.src, p->requestId);
    if (m_seen.contains(key))
    {
        return;
    }
    if (std::find(p->record.begin(), p->record.end(), self) != p->record.end())
    {
        return;
    }
    m_seen.insert(key);

    Route back{self};
    back.insert(back.end(), p->record.rbegin(), p->record.rend());
    m_cache.Add(back, m_node.Now());
    FlushBuffer();

    if (p->target == self)
    {
        Route full = p->record;
        full.push_back(self);
        SendRrep(full);
        return;
    }
    if (auto cached = m_cache.Find(p->target))
    {
        Route full = p->record;
        full.insert(full.end(), cached->begin(), cached->end());
        if (IsSimpleRoute(full))
        {
            SendRrep(full);
            return;
        }
    }
    p->record.push_back(self);
    m_node.Trace(TraceEvent::Forward, pkt);
    const double jitter = m_node.Rng().Uniform(0.0, kBroadcastJitter);
    m_node.After(jitter, [this, pkt = std::move(pkt)]() mutable {
        m_node.SendFrame(std::move(pkt), kBroadcast);
    });
}

void
DsrAgent::SendRrep(const Route& route)
{
    const NodeId self = m_node.Self();
    const auto pos = std::find(route.begin(), route.end(), self);
    Route back(std::make_reverse_iterator(pos + 1), route.rend());
    DsrRrepPayload p;
    p.route = route;
    Packet pkt = MakeControlPacket(m_node, PacketClass::Rrep, route.front(), std::move(p));
    m_node.Trace(TraceEvent::Send, pkt);
    SendSourceRouted(std::move(pkt), back);
}

void
DsrAgent::OnRrep(Packet pkt)
{
    auto* p = std::get_if<DsrRrepPayload>(&pkt.payload);
    const NodeId self = m_node.Self();
    if (!p || pkt.routeIndex >= pkt.sourceRoute.size() || pkt.sourceRoute[pkt.routeIndex] != self)
    {
        return;
    }
    const double now = m_node.Now();
    const auto pos = std::find(p->route.begin(), p->route.end(), self);
    if (pos != p->route.end())
    {
        m_cache.Add(Route(pos, p->route.end()), now);
        m_cache.Add(Route(std::make_reverse_iterator(pos + 1), p->route.rend()), now);
    }
    if (pkt.dst == self)
    {
        m_discoveries.erase(p->route.back());
        FlushBuffer();
        return;
    }
    ForwardSourceRouted(std::move(pkt));
}

void
DsrAgent::OnRerr(Packet pkt)
{
    auto* p = std::get_if<DsrRerrPayload>(&pkt.payload);
    const NodeId self = m_node.Self();
    if (!p || pkt.routeIndex >= pkt.sourceRoute.size() || pkt.sourceRoute[pkt.routeIndex] != self)
    {
        return;
    }
    m_cache.RemoveLink(p->from, p->to);
    if (pkt.dst != self)
    {
        ForwardSourceRouted(std::move(pkt));
        return;
    }
    for (NodeId dst : m_buffer.Destinations())
    {
        if (!m_cache.Find(dst))
        {
            StartDiscovery(dst);
        }
    }
    FlushBuffer();
}

void
DsrAgent::SendRerr(const Packet& failed, NodeId brokenTo)
{
    const NodeId self = m_node.Self();
    if (failed.sourceRoute.empty() || failed.routeIndex >= failed.sourceRoute.size())
    {
        return;
    }
    Route back(failed.sourceRoute.rend() - static_cast<std::ptrdiff_t>(failed.routeIndex) - 1,
               failed.sourceRoute.rend());
    if (back.size() < 2 || back.front() != self)
    {
        return;
    }
    DsrRerrPayload p;
    p.from = self;
    p.to = brokenTo;
    Packet pkt = MakeControlPacket(m_node, PacketClass::Rerr, back.back(), std::move(p));
    m_node.Trace(TraceEvent::Send, pkt);
    SendSourceRouted(std::move(pkt), back);
}

void
DsrAgent::LinkFailed(Packet pkt, NodeId nextHop)
{
    const NodeId self = m_node.Self();
    m_cache.RemoveLink(self, nextHop);
    const bool transport = pkt.cls == PacketClass::Data || pkt.cls == PacketClass::Ack;
    if (transport && pkt.src == self)
    {
        Originate(std::move(pkt));
        return;
    }
    if (pkt.cls != PacketClass::Rerr && pkt.src != self)
    {
        SendRerr(pkt, nextHop);
    }
    m_node.Trace(TraceEvent::Drop, pkt, DropReason::Cbk);
}

void
DsrAgent::FlushBuffer()
{
    for (NodeId dst : m_buffer.Destinations())
    {
        auto route = m_cache.Find(dst);
        if (!route)
        {
            continue;
        }
        m_discoveries.erase(dst);
        for (auto& p : m_buffer.Take(dst))
        {
            SendSourceRouted(std::move(p), *route);
        }
    }
}

} // namespace visim
