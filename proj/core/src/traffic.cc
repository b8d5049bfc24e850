#include "visim/traffic.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace visim
{

FlowSender::FlowSender(FlowSpec spec, int32_t flowId, UidSource uids)
    : m_spec(spec),
      m_flowId(flowId),
      m_uids(std::move(uids)),
      m_rto(spec.rtoInitial)
{
}

int64_t
FlowSender::Generated(double now) const
{
    if (now < m_spec.startTime)
    {
        return 0;
    }
    if (m_spec.interval <= 0.0)
    {
        return std::numeric_limits<int64_t>::max();
    }
    // Small epsilon so a tick scheduled exactly on a generation instant sees it.
    return static_cast<int64_t>(std::floor((now - m_spec.startTime) / m_spec.interval + 1e-9)) + 1;
}

Packet
FlowSender::MakeData(int64_t seq, PacketUid uid) const
{
    Packet p;
    p.uid = uid;
    p.cls = PacketClass::Data;
    p.size = m_spec.dataSize;
    p.src = m_spec.src;
    p.dst = m_spec.dst;
    p.payload = DataPayload{m_flowId, seq};
    return p;
}

std::vector<Packet>
FlowSender::Tick(double now)
{
    std::vector<Packet> out;
    const int64_t available = Generated(now);
    while (m_inFlight.size() < m_spec.window && m_nextSeq < available)
    {
        const PacketUid uid = m_uids();
        m_inFlight.emplace(m_nextSeq, uid);
        out.push_back(MakeData(m_nextSeq, uid));
        ++m_nextSeq;
    }
    return out;
}

bool
FlowSender::OnAck(int64_t cumulative)
{
    if (cumulative <= m_highestAcked)
    {
        return false;
    }
    m_highestAcked = std::min(cumulative, m_nextSeq - 1);
    m_inFlight.erase(m_inFlight.begin(), m_inFlight.upper_bound(m_highestAcked));
    m_rto = m_spec.rtoInitial;
    return true;
}

std::vector<Packet>
FlowSender::OnTimeout()
{
    std::vector<Packet> out;
    for (const auto& [seq, uid] : m_inFlight)
    {
        out.push_back(MakeData(seq, uid));
        ++m_retransmissions;
    }
    m_rto = std::min(m_rto * 2.0, m_spec.rtoInitial * 8.0);
    return out;
}

FlowReceiver::FlowReceiver(FlowSpec spec, int32_t flowId, UidSource uids)
    : m_spec(spec),
      m_flowId(flowId),
      m_uids(std::move(uids))
{
}

Packet
FlowReceiver::OnData(int64_t seq)
{
    m_delivered.insert(seq);
    while (m_delivered.contains(m_cumulative + 1))
    {
        ++m_cumulative;
    }
    Packet ack;
    ack.uid = m_uids();
    ack.cls = PacketClass::Ack;
    ack.size = m_spec.ackSize;
    ack.src = m_spec.dst;
    ack.dst = m_spec.src;
    ack.payload = AckPayload{m_flowId, m_cumulative};
    return ack;
}

} // namespace visim
