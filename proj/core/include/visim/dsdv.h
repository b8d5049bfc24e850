#ifndef VISIM_DSDV_H
#define VISIM_DSDV_H

#include "visim/routing.h"
#include "visim/send_buffer.h"

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace visim
{

inline constexpr uint32_t kInfiniteHops = std::numeric_limits<uint32_t>::max();

struct DsdvEntry
{
    NodeId dest = 0;
    NodeId nextHop = 0;
    uint32_t hops = 0;
    uint32_t seq = 0;
    /// Reset whenever the entry is replaced by an advertisement.
    double installTime = 0.0;
    /// Last change of next hop or metric; drives the settling delay.
    double changedTime = 0.0;
    /// Sequence or metric changed since the last full dump.
    bool changedSinceDump = true;
    /// Significant change not yet advertised.
    bool pendingTrigger = false;
    /// Metric carried by the last advertisement of this entry.
    std::optional<uint32_t> advertisedHops;

    bool Broken() const
    {
        return hops == kInfiniteHops;
    }
};

struct DsdvConfig
{
    double periodicInterval = 15.0;
    double settlingTime = 6.0;
    uint32_t npduSize = kRoutingSize;
    uint32_t entrySize = 12;
    /// Missed periodic advertisements before a silent neighbor is dropped.
    int missedAdverts = 3;
    /// First periodic advertisement is drawn uniformly in [0, startJitter).
    double startJitter = 1.0;
};

enum class UpdateMode
{
    Incremental,
    FullDump,
};

/// Incremental when the encoded entries fit in one NPDU, full dump otherwise.
UpdateMode SelectUpdateMode(std::size_t entryCount, const DsdvConfig& cfg);

/// Entries that fit in one advertisement packet.
std::size_t EntriesPerPacket(const DsdvConfig& cfg);

/**
 * Destination-sequenced distance-vector table. Sequence numbers follow the
 * even/odd convention: destinations issue even numbers, a broken route is
 * marked with the next odd number.
 */
class DsdvTable
{
  public:
    explicit DsdvTable(NodeId self, double now = 0.0);

    NodeId Self() const
    {
        return m_self;
    }

    const DsdvEntry* Find(NodeId dest) const;
    const std::map<NodeId, DsdvEntry>& Entries() const
    {
        return m_entries;
    }

    /// Next hop for a usable route, if any.
    std::optional<NodeId> NextHop(NodeId dest) const;

    void NoteNeighbor(NodeId neighbor, double now);
    bool IsNeighbor(NodeId neighbor) const;
    std::vector<NodeId> SilentNeighbors(double now, double maxSilence) const;
    /// True once since the last call if a neighbor appeared that was unknown.
    bool TakeNewNeighborFlag();

    /**
     * Applies an advertisement heard from `from`. Returns true when a
     * significant change happened (new destination, next hop or metric
     * change, broken route, restored route). Ignored when `from` is not a
     * known neighbor.
     */
    bool OnAdvertisement(NodeId from, std::span<const DsdvAdvertEntry> adv, double now);

    /// Marks every route through `neighbor` broken. Returns true if any changed.
    bool OnLinkBreak(NodeId neighbor, double now);

    /// Destination-side increment at each periodic advertisement.
    uint32_t BumpOwnSeq();

    /// Entries allowed on the air now: own entry, broken routes, and routes
    /// whose last change is at least `settling` old.
    bool Advertisable(const DsdvEntry& e, double now, double settling) const;

    /// A broken route is waiting to go out. Only these are sent at once;
    /// new and changed routes wait for the first periodic update after
    /// they settle.
    bool HasPendingBreak() const;

    std::vector<DsdvAdvertEntry> CollectFull(double now, double settling) const;
    std::vector<DsdvAdvertEntry> CollectChanged(double now, double settling) const;
    std::vector<DsdvAdvertEntry> CollectTriggered(double now, double settling) const;
    bool HasTriggered(double now, double settling) const;
    /// Clears settled triggers whose metric equals the one last advertised.
    void DropStaleTriggers(double now, double settling);

    /// Bookkeeping after sending: clears trigger flags (and change flags on
    /// a full dump) for the entries that went out.
    void MarkAdvertised(std::span<const DsdvAdvertEntry> sent, bool fullDump);

  private:
    static DsdvAdvertEntry ToAdvert(const DsdvEntry& e);

    NodeId m_self;
    std::map<NodeId, DsdvEntry> m_entries;
    std::map<NodeId, double> m_neighbors;
    bool m_newNeighbor = false;
};

class DsdvAgent : public RoutingAgent
{
  public:
    DsdvAgent(NodeServices& node, DsdvConfig cfg = {});

    Protocol Kind() const override
    {
        return Protocol::Dsdv;
    }

    void Start() override;
    void Send(Packet pkt) override;
    void Receive(Packet pkt, NodeId from) override;
    void LinkFailed(Packet pkt, NodeId nextHop) override;

    const DsdvTable& Table() const
    {
        return m_table;
    }

    const DsdvConfig& Config() const
    {
        return m_cfg;
    }

  private:
    void PeriodicTick();
    void TriggeredUpdate();
    void ScheduleTrigger();
    void Broadcast(const std::vector<DsdvAdvertEntry>& entries, bool fullDump);
    void Forward(Packet pkt);
    void FlushBuffer();
    void ExpireBuffer();

    NodeServices& m_node;
    DsdvConfig m_cfg;
    DsdvTable m_table;
    SendBuffer m_buffer;
    std::optional<EventId> m_triggerEvent;
    double m_triggerAt = 0.0;
};

} // namespace visim

#endif // VISIM_DSDV_H
