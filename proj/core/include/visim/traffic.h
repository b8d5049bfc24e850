#ifndef VISIM_TRAFFIC_H
#define VISIM_TRAFFIC_H

#include "visim/packet.h"

#include <functional>
#include <map>
#include <set>
#include <vector>

namespace visim
{

struct FlowSpec
{
    NodeId src = 0;
    NodeId dst = 0;
    double startTime = 1.0;
    uint32_t dataSize = kDataSize;
    uint32_t ackSize = kAckSize;
    uint32_t window = 4;
    double rtoInitial = 1.0;
    /// Application inter-packet time. Zero means the application always has
    /// data (window-limited only).
    double interval = 0.0;

    bool operator==(const FlowSpec&) const = default;
};

/**
 * Sender half of the reliable flow: a fixed window of outstanding data
 * packets, cumulative acks and a single retransmission timer whose period
 * doubles on consecutive timeouts (capped at 8x the initial value).
 */
class FlowSender
{
  public:
    using UidSource = std::function<PacketUid()>;

    FlowSender(FlowSpec spec, int32_t flowId, UidSource uids);

    /// New data packets that fit in the window at `now`.
    std::vector<Packet> Tick(double now);

    /// Processes a cumulative ack. Returns true when it acknowledged new data.
    bool OnAck(int64_t cumulative);

    /// Every in-flight packet again, with its original uid. Doubles the rto.
    std::vector<Packet> OnTimeout();

    double Rto() const
    {
        return m_rto;
    }

    std::size_t InFlight() const
    {
        return m_inFlight.size();
    }

    int64_t NextSeq() const
    {
        return m_nextSeq;
    }

    int64_t HighestAcked() const
    {
        return m_highestAcked;
    }

    uint64_t Retransmissions() const
    {
        return m_retransmissions;
    }

    const FlowSpec& Spec() const
    {
        return m_spec;
    }

    /// Packets the application has produced by `now` (unbounded when greedy).
    int64_t Generated(double now) const;

  private:
    Packet MakeData(int64_t seq, PacketUid uid) const;

    FlowSpec m_spec;
    int32_t m_flowId;
    UidSource m_uids;
    int64_t m_nextSeq = 0;
    int64_t m_highestAcked = -1;
    /// seq -> uid of packets sent but not yet acknowledged.
    std::map<int64_t, PacketUid> m_inFlight;
    double m_rto;
    uint64_t m_retransmissions = 0;
};

class FlowReceiver
{
  public:
    using UidSource = std::function<PacketUid()>;

    FlowReceiver(FlowSpec spec, int32_t flowId, UidSource uids);

    /// Records the arrival and returns the cumulative ack to send back.
    Packet OnData(int64_t seq);

    int64_t Cumulative() const
    {
        return m_cumulative;
    }

    const std::set<int64_t>& Delivered() const
    {
        return m_delivered;
    }

  private:
    FlowSpec m_spec;
    int32_t m_flowId;
    UidSource m_uids;
    std::set<int64_t> m_delivered;
    int64_t m_cumulative = -1;
};

} // namespace visim

#endif // VISIM_TRAFFIC_H
