#ifndef VISIM_METRICS_H
#define VISIM_METRICS_H

#include "visim/trace.h"

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace visim
{

enum class Metric : uint8_t
{
    Throughput,
    GoodputPackets,
    GoodputBytes,
    RoutingLoadPackets,
    RoutingLoadBytes,
};

const char* ToString(Metric m);
std::optional<Metric> ParseMetric(std::string_view name);

enum class GoodputMode : uint8_t
{
    Network,
    Source,
};

const char* ToString(GoodputMode m);
std::optional<GoodputMode> ParseGoodputMode(std::string_view name);

enum class Unit : uint8_t
{
    Packets,
    Bytes,
};

class EmptyRunError : public std::runtime_error
{
  public:
    EmptyRunError()
        : std::runtime_error("empty run")
    {
    }
};

struct Ratio
{
    double value = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
};

struct Tally
{
    uint64_t packets = 0;
    uint64_t bytes = 0;

    void Add(uint32_t size)
    {
        ++packets;
        bytes += size;
    }

    uint64_t Get(Unit u) const
    {
        return u == Unit::Packets ? packets : bytes;
    }

    Tally& operator+=(const Tally& o)
    {
        packets += o.packets;
        bytes += o.bytes;
        return *this;
    }

    bool operator==(const Tally&) const = default;
};

/**
 * Raw MAC transmission counts of one run (or a pooled set of runs). The
 * ratios are derived on demand so aggregation stays exact.
 */
struct MetricSummary
{
    Tally data;
    Tally sourceData;
    Tally routing;
    Tally ack;
    Tally total;

    Ratio Goodput(Unit u, GoodputMode mode = GoodputMode::Network) const;
    Ratio RoutingLoad(Unit u) const;
    Ratio AckShare(Unit u) const;
    /// Ratio metrics only; Throughput is rejected.
    Ratio Get(Metric m, GoodputMode mode = GoodputMode::Network) const;

    bool operator==(const MetricSummary&) const = default;
};

struct SeriesPoint
{
    double t = 0.0;
    double value = 0.0;
};

struct MetricSeries
{
    double bucket = 1.0;
    std::vector<SeriesPoint> points;

    /// Coefficient of variation over buckets with nonzero value; 0 if none.
    double NonzeroCv() const;
};

/// Accumulates one trace in a single pass.
class MetricScanner
{
  public:
    void Add(const TraceLine& line);

    /// Throws EmptyRunError when no MAC transmission was seen.
    MetricSummary Summary() const;

    /// Destinations of data packets sent at the agent layer.
    const std::set<NodeId>& FlowDestinations() const
    {
        return m_flowDsts;
    }

    std::optional<double> FirstDelivery() const
    {
        return m_firstDelivery;
    }

    Micros LastTime() const
    {
        return m_last;
    }

  private:
    MetricSummary m_sum;
    std::set<NodeId> m_flowDsts;
    std::optional<double> m_firstDelivery;
    Micros m_last = 0;
};

MetricSummary Summarize(const std::vector<TraceLine>& lines);
MetricSummary Summarize(const std::filesystem::path& trace);

/**
 * Bytes received per second at the given nodes (MAC 'r' records, all
 * classes), in buckets [k*bucket, (k+1)*bucket) covering [0, duration).
 * With no explicit destinations, the data-flow destinations found in the
 * trace are used. Throws std::invalid_argument when bucket <= 0.
 */
MetricSeries ThroughputSeries(const std::vector<TraceLine>& lines,
                              double bucket,
                              std::optional<double> duration = std::nullopt,
                              std::optional<std::set<NodeId>> dsts = std::nullopt);

/// Time of the first data packet delivered at an agent layer.
std::optional<double> FirstDelivery(const std::vector<TraceLine>& lines);

/// Pooled counts; throws std::invalid_argument on an empty list.
MetricSummary Aggregate(const std::vector<MetricSummary>& runs);

} // namespace visim

#endif // VISIM_METRICS_H
