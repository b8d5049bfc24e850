#include "visim/dsdv.h"

#include <algorithm>

namespace visim
{

UpdateMode
SelectUpdateMode(std::size_t entryCount, const DsdvConfig& cfg)
{
    return entryCount * cfg.entrySize <= cfg.npduSize ? UpdateMode::Incremental : UpdateMode::FullDump;
}

std::size_t
EntriesPerPacket(const DsdvConfig& cfg)
{
    return std::max<std::size_t>(1, cfg.npduSize / cfg.entrySize);
}

DsdvTable::DsdvTable(NodeId self, double now)
    : m_self(self)
{
    DsdvEntry own;
    own.dest = self;
    own.nextHop = self;
    own.hops = 0;
    own.seq = 0;
    own.installTime = now;
    own.changedTime = now;
    m_entries.emplace(self, own);
}

const DsdvEntry*
DsdvTable::Find(NodeId dest) const
{
    auto it = m_entries.find(dest);
    return it == m_entries.end() ? nullptr : &it->second;
}

std::optional<NodeId>
DsdvTable::NextHop(NodeId dest) const
{
    const auto* e = Find(dest);
    if (!e || e->Broken() || dest == m_self)
    {
        return std::nullopt;
    }
    return e->nextHop;
}

void
DsdvTable::NoteNeighbor(NodeId neighbor, double now)
{
    auto [it, inserted] = m_neighbors.insert_or_assign(neighbor, now);
    if (inserted)
    {
        m_newNeighbor = true;
    }
}

bool
DsdvTable::IsNeighbor(NodeId neighbor) const
{
    return m_neighbors.contains(neighbor);
}

std::vector<NodeId>
DsdvTable::SilentNeighbors(double now, double maxSilence) const
{
    std::vector<NodeId> out;
    for (const auto& [n, heard] : m_neighbors)
    {
        if (now - heard > maxSilence)
        {
            out.push_back(n);
        }
    }
    return out;
}

bool
DsdvTable::TakeNewNeighborFlag()
{
    return std::exchange(m_newNeighbor, false);
}

bool
DsdvTable::OnAdvertisement(NodeId from, std::span<const DsdvAdvertEntry> adv, double now)
{
    if (!IsNeighbor(from) || from == m_self)
    {
        return false;
    }
    bool significant = false;
    for (const auto& a : adv)
    {
        if (a.dest == m_self)
        {
            // Someone reports us unreachable with a newer odd number: answer
            // with a fresher even one.
            auto& own = m_entries.at(m_self);
            if (a.seq > own.seq)
            {
                own.seq = a.seq + (a.seq % 2 == 1 ? 1 : 0);
                own.changedSinceDump = true;
                own.pendingTrigger = true;
                significant = true;
            }
            continue;
        }
        const uint32_t hops = a.hops == kInfiniteHops ? kInfiniteHops : a.hops + 1;
        auto it = m_entries.find(a.dest);
        if (it == m_entries.end())
        {
            if (hops == kInfiniteHops)
            {
                continue;
            }
            DsdvEntry e;
            e.dest = a.dest;
            e.nextHop = from;
            e.hops = hops;
            e.seq = a.seq;
            e.installTime = now;
            e.changedTime = now;
            e.changedSinceDump = true;
            e.pendingTrigger = true;
            m_entries.emplace(a.dest, e);
            significant = true;
            continue;
        }
        auto& e = it->second;
        const bool newer = a.seq > e.seq;
        const bool better = a.seq == e.seq && hops < e.hops;
        if (!newer && !better)
        {
            continue;
        }
        if (e.Broken() && hops == kInfiniteHops)
        {
            e.seq = a.seq;
            e.installTime = now;
            e.changedSinceDump = true;
            continue;
        }
        // Neighbors only see (dest, seq, metric): a new next hop at the same
        // metric changes nothing they could act on.
        const bool metricChange = e.hops != hops;
        e.nextHop = from;
        e.hops = hops;
        e.seq = a.seq;
        e.installTime = now;
        e.changedSinceDump = true;
        if (metricChange)
        {
            e.changedTime = now;
            e.pendingTrigger = true;
            significant = true;
        }
    }
    return significant;
}

bool
DsdvTable::OnLinkBreak(NodeId neighbor, double now)
{
    m_neighbors.erase(neighbor);
    bool changed = false;
    for (auto& [dest, e] : m_entries)
    {
        if (dest == m_self || e.nextHop != neighbor || e.Broken())
        {
            continue;
        }
        e.hops = kInfiniteHops;
        if (e.seq % 2 == 0)
        {
            ++e.seq;
        }
        e.changedTime = now;
        e.changedSinceDump = true;
        e.pendingTrigger = true;
        changed = true;
    }
    return changed;
}

uint32_t
DsdvTable::BumpOwnSeq()
{
    auto& own = m_entries.at(m_self);
    own.seq += 2;
    own.changedSinceDump = true;
    return own.seq;
}

bool
DsdvTable::Advertisable(const DsdvEntry& e, double now, double settling) const
{
    return e.dest == m_self || e.Broken() || now - e.changedTime >= settling;
}

bool
DsdvTable::HasPendingBreak() const
{
    for (const auto& [dest, e] : m_entries)
    {
        if (dest != m_self && e.pendingTrigger && e.Broken())
        {
            return true;
        }
    }
    return false;
}

DsdvAdvertEntry
DsdvTable::ToAdvert(const DsdvEntry& e)
{
    return DsdvAdvertEntry{e.dest, e.seq, e.hops};
}

std::vector<DsdvAdvertEntry>
DsdvTable::CollectFull(double now, double settling) const
{
    std::vector<DsdvAdvertEntry> out{ToAdvert(m_entries.at(m_self))};
    for (const auto& [dest, e] : m_entries)
    {
        if (dest != m_self && Advertisable(e, now, settling))
        {
            out.push_back(ToAdvert(e));
        }
    }
    return out;
}

std::vector<DsdvAdvertEntry>
DsdvTable::CollectChanged(double now, double settling) const
{
    std::vector<DsdvAdvertEntry> out{ToAdvert(m_entries.at(m_self))};
    for (const auto& [dest, e] : m_entries)
    {
        if (dest != m_self && e.changedSinceDump && Advertisable(e, now, settling))
        {
            out.push_back(ToAdvert(e));
        }
    }
    return out;
}

std::vector<DsdvAdvertEntry>
DsdvTable::CollectTriggered(double now, double settling) const
{
    std::vector<DsdvAdvertEntry> out{ToAdvert(m_entries.at(m_self))};
    for (const auto& [dest, e] : m_entries)
    {
        if (dest != m_self && e.pendingTrigger && Advertisable(e, now, settling) && e.advertisedHops != e.hops)
        {
            out.push_back(ToAdvert(e));
        }
    }
    return out;
}

bool
DsdvTable::HasTriggered(double now, double settling) const
{
    for (const auto& [dest, e] : m_entries)
    {
        if (e.pendingTrigger && Advertisable(e, now, settling) && e.advertisedHops != e.hops)
        {
            return true;
        }
    }
    return false;
}

void
DsdvTable::DropStaleTriggers(double now, double settling)
{
    for (auto& [dest, e] : m_entries)
    {
        if (e.pendingTrigger && Advertisable(e, now, settling) && e.advertisedHops == e.hops)
        {
            e.pendingTrigger = false;
        }
    }
}

void
DsdvTable::MarkAdvertised(std::span<const DsdvAdvertEntry> sent, bool fullDump)
{
    for (const auto& a : sent)
    {
        auto it = m_entries.find(a.dest);
        if (it == m_entries.end())
        {
            continue;
        }
        it->second.pendingTrigger = false;
        it->second.advertisedHops = a.hops;
        if (fullDump)
        {
            it->second.changedSinceDump = false;
        }
    }
}

// ---------------------------------------------------------------------------

DsdvAgent::DsdvAgent(NodeServices& node, DsdvConfig cfg)
    : m_node(node),
      m_cfg(cfg),
      m_table(node.Self(), node.Now())
{
}

void
DsdvAgent::Start()
{
    const double first = m_node.Rng().Uniform(0.0, m_cfg.startJitter);
    m_node.After(first, [this] { PeriodicTick(); });
}

void
DsdvAgent::PeriodicTick()
{
    const double now = m_node.Now();
    ExpireBuffer();
    const double silence = m_cfg.missedAdverts * m_cfg.periodicInterval;
    for (NodeId n : m_table.SilentNeighbors(now, silence))
    {
        m_table.OnLinkBreak(n, now);
    }
    m_table.BumpOwnSeq();
    const bool newNeighbor = m_table.TakeNewNeighborFlag();
    auto changed = m_table.CollectChanged(now, m_cfg.settlingTime);
    if (newNeighbor || SelectUpdateMode(changed.size(), m_cfg) == UpdateMode::FullDump)
    {
        Broadcast(m_table.CollectFull(now, m_cfg.settlingTime), true);
    }
    else
    {
        Broadcast(changed, false);
    }
    ScheduleTrigger();
    m_node.After(m_cfg.periodicInterval, [this] { PeriodicTick(); });
}

void
DsdvAgent::ScheduleTrigger()
{
    const double now = m_node.Now();
    if (!m_table.HasPendingBreak())
    {
        return;
    }
    const double when = now + m_node.Rng().Uniform(0.0, kBroadcastJitter);
    if (m_triggerEvent && m_triggerAt <= when)
    {
        return;
    }
    if (m_triggerEvent)
    {
        m_node.Cancel(*m_triggerEvent);
    }
    m_triggerAt = when;
    m_triggerEvent = m_node.After(when - now, [this] {
        m_triggerEvent.reset();
        TriggeredUpdate();
    });
}

void
DsdvAgent::TriggeredUpdate()
{
    const double now = m_node.Now();
    m_table.DropStaleTriggers(now, m_cfg.settlingTime);
    if (m_table.HasTriggered(now, m_cfg.settlingTime))
    {
        bool full = m_table.TakeNewNeighborFlag();
        auto entries = full ? m_table.CollectFull(now, m_cfg.settlingTime)
                            : m_table.CollectTriggered(now, m_cfg.settlingTime);
        if (!full && SelectUpdateMode(entries.size(), m_cfg) == UpdateMode::FullDump)
        {
            full = true;
            entries = m_table.CollectFull(now, m_cfg.settlingTime);
        }
        Broadcast(entries, full);
    }
    ScheduleTrigger();
}

void
DsdvAgent::Broadcast(const std::vector<DsdvAdvertEntry>& entries, bool fullDump)
{
    const std::size_t per = EntriesPerPacket(m_cfg);
    for (std::size_t i = 0; i < entries.size(); i += per)
    {
        DsdvUpdatePayload payload;
        payload.fullDump = fullDump;
        const auto end = std::min(entries.size(), i + per);
        payload.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(i),
                               entries.begin() + static_cast<std::ptrdiff_t>(end));
        Packet pkt = MakeControlPacket(m_node, PacketClass::Update, kBroadcast, std::move(payload));
        m_node.Trace(TraceEvent::Send, pkt);
        m_node.SendFrame(std::move(pkt), kBroadcast);
    }
    m_table.MarkAdvertised(entries, fullDump);
}

void
DsdvAgent::Send(Packet pkt)
{
    m_node.Trace(TraceEvent::Send, pkt);
    if (auto next = m_table.NextHop(pkt.dst))
    {
        m_node.SendFrame(std::move(pkt), *next);
        return;
    }
    if (auto evicted = m_buffer.Add(std::move(pkt), m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, *evicted, DropReason::Ifq);
    }
}

void
DsdvAgent::Forward(Packet pkt)
{
    if (auto next = m_table.NextHop(pkt.dst))
    {
        m_node.Trace(TraceEvent::Forward, pkt);
        m_node.SendFrame(std::move(pkt), *next);
        return;
    }
    m_node.Trace(TraceEvent::Drop, pkt, DropReason::Nrte);
}

void
DsdvAgent::Receive(Packet pkt, NodeId from)
{
    const double now = m_node.Now();
    if (pkt.cls == PacketClass::Update)
    {
        const auto* upd = std::get_if<DsdvUpdatePayload>(&pkt.payload);
        if (!upd)
        {
            return;
        }
        m_table.NoteNeighbor(from, now);
        if (m_table.OnAdvertisement(from, upd->entries, now))
        {
            ScheduleTrigger();
        }
        FlushBuffer();
        return;
    }
    if (pkt.dst == m_node.Self())
    {
        m_node.DeliverUp(pkt);
        return;
    }
    Forward(std::move(pkt));
}

void
DsdvAgent::LinkFailed(Packet pkt, NodeId nextHop)
{
    if (m_table.OnLinkBreak(nextHop, m_node.Now()))
    {
        ScheduleTrigger();
    }
    if (pkt.src == m_node.Self() && (pkt.cls == PacketClass::Data || pkt.cls == PacketClass::Ack))
    {
        if (auto evicted = m_buffer.Add(std::move(pkt), m_node.Now()))
        {
            m_node.Trace(TraceEvent::Drop, *evicted, DropReason::Ifq);
        }
        return;
    }
    m_node.Trace(TraceEvent::Drop, pkt, DropReason::Cbk);
}

void
DsdvAgent::FlushBuffer()
{
    for (NodeId dst : m_buffer.Destinations())
    {
        auto next = m_table.NextHop(dst);
        if (!next)
        {
            continue;
        }
        for (auto& p : m_buffer.Take(dst))
        {
            m_node.SendFrame(std::move(p), *next);
        }
    }
}

void
DsdvAgent::ExpireBuffer()
{
    for (auto& p : m_buffer.Expire(m_node.Now()))
    {
        m_node.Trace(TraceEvent::Drop, p, DropReason::Nrte);
    }
}

} // namespace visim
