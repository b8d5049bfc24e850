#ifndef VISIM_DSR_H
#define VISIM_DSR_H

#include "visim/routing.h"
#include "visim/send_buffer.h"

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace visim
{

using Route = std::vector<NodeId>;

/// True when no node appears twice.
bool IsSimpleRoute(const Route& route);

struct CachedRoute
{
    Route nodes;
    double installTime = 0.0;
};

/**
 * Path cache. Every stored route starts at the owner and ends at its
 * destination with no repeated node. Adding a route also stores each of
 * its prefixes as a route to the intermediate node.
 */
class RouteCache
{
  public:
    explicit RouteCache(NodeId self, std::size_t maxPerDestination = 8);

    /// Returns false (and stores nothing) for routes that do not start at
    /// the owner, have fewer than two nodes, or repeat a node.
    bool Add(const Route& route, double now);

    /// Fewest hops first; ties go to the most recently installed route.
    std::optional<Route> Find(NodeId dst) const;

    /// Removes every route using the link u-v in either direction.
    std::size_t RemoveLink(NodeId u, NodeId v);

    std::vector<CachedRoute> Routes(NodeId dst) const;
    std::size_t Size() const;

  private:
    void AddOne(const Route& route, double now);

    NodeId m_self;
    std::size_t m_maxPerDestination;
    std::map<NodeId, std::vector<CachedRoute>> m_routes;
};

struct DsrConfig
{
    std::size_t sendBufferPerDestination = 64;
    double sendBufferTimeout = 30.0;
    double requestBackoffInitial = 1.0;
    double requestBackoffMax = 10.0;
};

class DsrAgent : public RoutingAgent
{
  public:
    DsrAgent(NodeServices& node, DsrConfig cfg = {});

    Protocol Kind() const override
    {
        return Protocol::Dsr;
    }

    void Start() override;
    void Send(Packet pkt) override;
    void Receive(Packet pkt, NodeId from) override;
    void LinkFailed(Packet pkt, NodeId nextHop) override;

    const RouteCache& Cache() const
    {
        return m_cache;
    }

    RouteCache& MutableCache()
    {
        return m_cache;
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
        double backoff = 1.0;
        uint64_t generation = 0;
    };

    void Originate(Packet pkt);
    void SendSourceRouted(Packet pkt, const Route& route);
    void ForwardSourceRouted(Packet pkt);
    void StartDiscovery(NodeId dst);
    void RetryDiscovery(NodeId dst, uint64_t generation);
    void SendRreq(NodeId dst);
    void OnRreq(Packet pkt, NodeId from);
    void SendRrep(const Route& route);
    void OnRrep(Packet pkt);
    void OnRerr(Packet pkt);
    void SendRerr(const Packet& failed, NodeId brokenTo);
    void FlushBuffer();
    void Housekeeping();
    void Buffer(Packet pkt);

    NodeServices& m_node;
    DsrConfig m_cfg;
    RouteCache m_cache;
    SendBuffer m_buffer;
    uint32_t m_requestId = 0;
    std::set<std::pair<NodeId, uint32_t>> m_seen;
    std::map<NodeId, Discovery> m_discoveries;
    uint64_t m_generation = 0;
};

} // namespace visim

#endif // VISIM_DSR_H
