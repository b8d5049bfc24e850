#include "visim/sim_core.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace visim
{

const char*
ToString(EventKind kind)
{
    switch (kind)
    {
    case EventKind::PacketDelivery:
        return "packet-delivery";
    case EventKind::Timer:
        return "timer";
    case EventKind::MobilityStep:
        return "mobility-step";
    case EventKind::TrafficTick:
        return "traffic-tick";
    }
    return "unknown";
}

EventId
Simulator::ScheduleAt(double fireTime, std::function<void()> action, EventKind kind, NodeId target)
{
    if (!(fireTime >= m_now) || std::isnan(fireTime))
    {
        throw std::invalid_argument("cannot schedule event at t=" + std::to_string(fireTime) +
                                    " before now=" + std::to_string(m_now));
    }
    Event ev;
    ev.fireTime = fireTime;
    ev.seq = m_nextSeq++;
    ev.target = target;
    ev.kind = kind;
    ev.action = std::move(action);
    const EventId id = ev.seq;
    m_queue.push(std::move(ev));
    return id;
}

EventId
Simulator::Schedule(double delay, std::function<void()> action, EventKind kind, NodeId target)
{
    if (delay < 0.0)
    {
        throw std::invalid_argument("negative delay");
    }
    return ScheduleAt(m_now + delay, std::move(action), kind, target);
}

void
Simulator::Cancel(EventId id)
{
    m_cancelled.insert(id);
}

uint64_t
Simulator::RunUntil(double tEnd)
{
    if (tEnd < m_now)
    {
        throw std::invalid_argument("run_until target lies in the past");
    }
    uint64_t processed = 0;
    while (!m_queue.empty() && m_queue.top().fireTime <= tEnd)
    {
        // Only the action is moved; fireTime and seq stay valid for pop().
        Event ev = std::move(const_cast<Event&>(m_queue.top()));
        m_queue.pop();
        if (auto it = m_cancelled.find(ev.seq); it != m_cancelled.end())
        {
            m_cancelled.erase(it);
            continue;
        }
        m_now = ev.fireTime;
        if (m_observer)
        {
            m_observer(ev);
        }
        ++processed;
        if (ev.action)
        {
            ev.action();
        }
    }
    m_now = tEnd;
    return processed;
}

bool
Simulator::Empty() const
{
    return m_queue.size() <= m_cancelled.size();
}

std::size_t
Simulator::Pending() const
{
    return m_queue.size() - std::min(m_queue.size(), m_cancelled.size());
}

namespace
{

uint64_t
SplitMix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t
Fnv1a(std::string_view s)
{
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

RngStream::RngStream(uint64_t seed, std::string_view streamId)
    : m_seed(seed),
      m_name(streamId),
      m_engine(SplitMix64(seed ^ SplitMix64(Fnv1a(streamId))))
{
}

double
RngStream::Uniform()
{
    return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
}

double
RngStream::Uniform(double lo, double hi)
{
    return lo + (hi - lo) * Uniform();
}

int64_t
RngStream::UniformInt(int64_t lo, int64_t hi)
{
    if (hi < lo)
    {
        throw std::invalid_argument("UniformInt: empty range");
    }
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0)
    {
        return static_cast<int64_t>(m_engine());
    }
    // Rejection sampling keeps the result unbiased and library-independent.
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    uint64_t r;
    do
    {
        r = m_engine();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
}

} // namespace visim
