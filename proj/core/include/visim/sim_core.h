#ifndef VISIM_SIM_CORE_H
#define VISIM_SIM_CORE_H

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace visim
{

using NodeId = int32_t;

/// Target value for events that do not belong to a single node.
inline constexpr NodeId kGlobalTarget = -1;

enum class EventKind : uint8_t
{
    PacketDelivery,
    Timer,
    MobilityStep,
    TrafficTick,
};

const char* ToString(EventKind kind);

using EventId = uint64_t;

/**
 * A timestamped occurrence owned by a Simulator. Events with equal fire_time
 * pop in insertion order (ascending seq).
 */
struct Event
{
    double fireTime = 0.0;
    EventId seq = 0;
    NodeId target = kGlobalTarget;
    EventKind kind = EventKind::Timer;
    std::function<void()> action;
};

/// Observer called for every processed event; used for replay diffs.
using EventObserver = std::function<void(const Event&)>;

/**
 * Deterministic single-threaded discrete-event engine.
 *
 * Scheduling in the past throws std::invalid_argument. Cancelled events are
 * dropped lazily when they reach the head of the queue.
 */
class Simulator
{
  public:
    Simulator() = default;
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    double Now() const
    {
        return m_now;
    }

    EventId ScheduleAt(double fireTime,
                       std::function<void()> action,
                       EventKind kind = EventKind::Timer,
                       NodeId target = kGlobalTarget);

    EventId Schedule(double delay,
                     std::function<void()> action,
                     EventKind kind = EventKind::Timer,
                     NodeId target = kGlobalTarget);

    void Cancel(EventId id);

    /// Processes every event with fireTime <= tEnd, then sets Now() to tEnd.
    uint64_t RunUntil(double tEnd);

    bool Empty() const;
    std::size_t Pending() const;

    void SetObserver(EventObserver observer)
    {
        m_observer = std::move(observer);
    }

  private:
    struct Later
    {
        bool operator()(const Event& a, const Event& b) const
        {
            if (a.fireTime != b.fireTime)
            {
                return a.fireTime > b.fireTime;
            }
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> m_queue;
    std::unordered_set<EventId> m_cancelled;
    double m_now = 0.0;
    EventId m_nextSeq = 0;
    EventObserver m_observer;
};

/**
 * Named, seeded random stream. The sequence depends only on (seed, name), so
 * draws in one subsystem never shift another subsystem's values. Built on
 * std::mt19937_64, whose output is fixed by the standard; real-valued draws
 * use the top 53 bits so results match across standard libraries.
 */
class RngStream
{
  public:
    RngStream(uint64_t seed, std::string_view streamId);

    /// Uniform in [0, 1).
    double Uniform();
    /// Uniform in [lo, hi).
    double Uniform(double lo, double hi);
    /// Uniform integer in [lo, hi], inclusive.
    int64_t UniformInt(int64_t lo, int64_t hi);

    uint64_t Seed() const
    {
        return m_seed;
    }

    const std::string& Name() const
    {
        return m_name;
    }

  private:
    uint64_t m_seed;
    std::string m_name;
    std::mt19937_64 m_engine;
};

} // namespace visim

#endif // VISIM_SIM_CORE_H
