#ifndef VISIM_AODV_H
#define VISIM_AODV_H

#include "visim/routing.h"
#include "visim/send_buffer.h"

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace visim
{

struct AodvEntry
{
    NodeId dest = 0;
    NodeId nextHop = 0;
    uint32_t hops = 0;
    uint32_t seq = 0;
    bool seqValid = false;
    bool valid = false;
    /// Absolute expiry time; the entry is unusable afterwards.
    double expiry = 0.0;
    /// Upstream neighbors that route through us toward dest.
    std::set<NodeId> precursors;

    bool Usable(double now) const
    {
        return valid && expiry > now;
    }
};

struct AodvConfig
{
    double activeRouteTimeout = 10.0;
    int rreqRetries = 2;
    double rreqWaitInitial = 1.0;
    std::size_t sendBufferPerDestination = 64;
    double sendBufferTimeout = 30.0;
};

using RreqKey = std::pair<NodeId, uint32_t>;

class AodvAgent : public RoutingAgent
{
  public:
    AodvAgent(NodeServices& node, AodvConfig cfg = {});

    Protocol Kind() const override
    {
        return Protocol::Aodv;
    }

    void Start() override;
    void Send(Packet pkt) override;
    void Receive(Packet pkt, NodeId from) override;
    void LinkFailed(Packet pkt, NodeId nextHop) override;

    const AodvEntry* Find(NodeId dest) const;
    const std::map<NodeId, AodvEntry>& Table() const
    {
        return m_table;
    }

    /// Direct table write; lets tests stage expired or stale entries.
    void InstallRoute(const AodvEntry& entry)
    {
        m_table[entry.dest] = entry;
    }

    bool Seen(const RreqKey& key) const
    {
        return m_seen.contains(key);
    }

    uint32_t OwnSeq() const
    {
        return m_seq;
    }

    const SendBuffer& Buffer() const
    {
        return m_buffer;
    }

    bool DiscoveryActive(NodeId dst) const
    {
        return m_discoveries.contains(dst);
    }

  private:
    struct Discovery
    {
        int retries = 0;
        double wait = 1.0;
        uint64_t generation = 0;
    };

    void Originate(Packet pkt);
    void Buffer(Packet pkt);
    void StartDiscovery(NodeId dst);
    void DiscoveryTimeout(NodeId dst, uint64_t generation);
    void SendRreq(NodeId dst);
    void OnRreq(Packet pkt, NodeId from);
    void OnRrep(Packet pkt, NodeId from);
    void OnRerr(Packet pkt, NodeId from);
    void ForwardTransport(Packet pkt, NodeId from);
    void SendRerr(NodeId to, std::vector<AodvRerrPayload::Unreachable> list);
    void Propagate(const std::vector<std::pair<AodvRerrPayload::Unreachable, std::set<NodeId>>>& lost);
    /// Installs or refreshes a route when the offer is fresher or shorter.
    void UpdateRoute(NodeId dest, NodeId nextHop, uint32_t hops, uint32_t seq, bool seqValid);
    void Refresh(NodeId dest);
    void FlushBuffer();
    void Housekeeping();

    NodeServices& m_node;
    AodvConfig m_cfg;
    std::map<NodeId, AodvEntry> m_table;
    std::set<RreqKey> m_seen;
    SendBuffer m_buffer;
    std::map<NodeId, Discovery> m_discoveries;
    uint32_t m_seq = 0;
    uint32_t m_rreqId = 0;
    uint64_t m_generation = 0;
};

} // namespace visim

#endif // VISIM_AODV_H
