#ifndef VISIM_SEND_BUFFER_H
#define VISIM_SEND_BUFFER_H

#include "visim/packet.h"

#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace visim
{

/**
 * Packets waiting for a route, per destination. Overflow evicts the oldest
 * packet for that destination; a packet whose uid is already buffered
 * replaces the older copy (transport retransmissions do not pile up).
 */
class SendBuffer
{
  public:
    SendBuffer(std::size_t perDestination = 64, double timeout = 30.0)
        : m_capacity(perDestination),
          m_timeout(timeout)
    {
    }

    /// Returns the evicted packet, if any.
    std::optional<Packet> Add(Packet pkt, double now)
    {
        auto& q = m_queues[pkt.dst];
        for (auto& e : q)
        {
            if (e.packet.uid == pkt.uid)
            {
                e.packet = std::move(pkt);
                e.queuedAt = now;
                return std::nullopt;
            }
        }
        std::optional<Packet> evicted;
        if (q.size() >= m_capacity)
        {
            evicted = std::move(q.front().packet);
            q.pop_front();
        }
        q.push_back(Entry{std::move(pkt), now});
        return evicted;
    }

    std::vector<Packet> Take(NodeId dst)
    {
        std::vector<Packet> out;
        auto it = m_queues.find(dst);
        if (it == m_queues.end())
        {
            return out;
        }
        for (auto& e : it->second)
        {
            out.push_back(std::move(e.packet));
        }
        m_queues.erase(it);
        return out;
    }

    /// Removes and returns packets older than the timeout.
    std::vector<Packet> Expire(double now)
    {
        std::vector<Packet> out;
        for (auto it = m_queues.begin(); it != m_queues.end();)
        {
            auto& q = it->second;
            while (!q.empty() && now - q.front().queuedAt >= m_timeout)
            {
                out.push_back(std::move(q.front().packet));
                q.pop_front();
            }
            it = q.empty() ? m_queues.erase(it) : std::next(it);
        }
        return out;
    }

    bool Has(NodeId dst) const
    {
        auto it = m_queues.find(dst);
        return it != m_queues.end() && !it->second.empty();
    }

    std::size_t Count(NodeId dst) const
    {
        auto it = m_queues.find(dst);
        return it == m_queues.end() ? 0 : it->second.size();
    }

    std::vector<NodeId> Destinations() const
    {
        std::vector<NodeId> out;
        for (const auto& [dst, q] : m_queues)
        {
            if (!q.empty())
            {
                out.push_back(dst);
            }
        }
        return out;
    }

    double Timeout() const
    {
        return m_timeout;
    }

  private:
    struct Entry
    {
        Packet packet;
        double queuedAt = 0.0;
    };

    std::size_t m_capacity;
    double m_timeout;
    std::map<NodeId, std::deque<Entry>> m_queues;
};

} // namespace visim

#endif // VISIM_SEND_BUFFER_H
