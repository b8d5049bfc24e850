#include "visim/metrics.h"

#include <cmath>

namespace visim
{

const char*
ToString(Metric m)
{
    switch (m)
    {
    case Metric::Throughput:
        return "throughput";
    case Metric::GoodputPackets:
        return "goodput_packets";
    case Metric::GoodputBytes:
        return "goodput_bytes";
    case Metric::RoutingLoadPackets:
        return "routing_load_packets";
    case Metric::RoutingLoadBytes:
        return "routing_load_bytes";
    }
    return "?";
}

std::optional<Metric>
ParseMetric(std::string_view name)
{
    for (Metric m : {Metric::Throughput,
                     Metric::GoodputPackets,
                     Metric::GoodputBytes,
                     Metric::RoutingLoadPackets,
                     Metric::RoutingLoadBytes})
    {
        if (name == ToString(m))
        {
            return m;
        }
    }
    return std::nullopt;
}

const char*
ToString(GoodputMode m)
{
    return m == GoodputMode::Network ? "network" : "source";
}

std::optional<GoodputMode>
ParseGoodputMode(std::string_view name)
{
    if (name == "network")
    {
        return GoodputMode::Network;
    }
    if (name == "source")
    {
        return GoodputMode::Source;
    }
    return std::nullopt;
}

namespace
{

Ratio
MakeRatio(const Tally& num, const Tally& den, Unit u)
{
    Ratio r;
    r.numerator = static_cast<double>(num.Get(u));
    r.denominator = static_cast<double>(den.Get(u));
    if (den.Get(u) == 0)
    {
        throw EmptyRunError();
    }
    r.value = r.numerator / r.denominator;
    return r;
}

} // namespace

Ratio
MetricSummary::Goodput(Unit u, GoodputMode mode) const
{
    return MakeRatio(mode == GoodputMode::Network ? data : sourceData, total, u);
}

Ratio
MetricSummary::RoutingLoad(Unit u) const
{
    return MakeRatio(routing, total, u);
}

Ratio
MetricSummary::AckShare(Unit u) const
{
    return MakeRatio(ack, total, u);
}

Ratio
MetricSummary::Get(Metric m, GoodputMode mode) const
{
    switch (m)
    {
    case Metric::GoodputPackets:
        return Goodput(Unit::Packets, mode);
    case Metric::GoodputBytes:
        return Goodput(Unit::Bytes, mode);
    case Metric::RoutingLoadPackets:
        return RoutingLoad(Unit::Packets);
    case Metric::RoutingLoadBytes:
        return RoutingLoad(Unit::Bytes);
    case Metric::Throughput:
        break;
    }
    throw std::invalid_argument("throughput is a series, not a ratio");
}

double
MetricSeries::NonzeroCv() const
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : points)
    {
        if (p.value > 0.0)
        {
            sum += p.value;
            ++n;
        }
    }
    if (n == 0)
    {
        return 0.0;
    }
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const auto& p : points)
    {
        if (p.value > 0.0)
        {
            var += (p.value - mean) * (p.value - mean);
        }
    }
    var /= static_cast<double>(n);
    return std::sqrt(var) / mean;
}

void
MetricScanner::Add(const TraceLine& line)
{
    m_last = std::max(m_last, TimeOf(line));
    const auto* r = std::get_if<TraceRecord>(&line);
    if (!r)
    {
        return;
    }
    if (r->layer == Layer::Agt && r->cls == PacketClass::Data)
    {
        if (r->evt == TraceEvent::Send)
        {
            m_flowDsts.insert(r->dst);
        }
        else if (r->evt == TraceEvent::Receive && !m_firstDelivery)
        {
            m_firstDelivery = ToSeconds(r->time);
        }
    }
    if (r->layer != Layer::Mac || (r->evt != TraceEvent::Send && r->evt != TraceEvent::Forward))
    {
        return;
    }
    m_sum.total.Add(r->size);
    if (r->cls == PacketClass::Data)
    {
        m_sum.data.Add(r->size);
        if (r->node == r->src)
        {
            m_sum.sourceData.Add(r->size);
        }
    }
    else if (r->cls == PacketClass::Ack)
    {
        m_sum.ack.Add(r->size);
    }
    else
    {
        m_sum.routing.Add(r->size);
    }
}

MetricSummary
MetricScanner::Summary() const
{
    if (m_sum.total.packets == 0)
    {
        throw EmptyRunError();
    }
    return m_sum;
}

MetricSummary
Summarize(const std::vector<TraceLine>& lines)
{
    MetricScanner s;
    for (const auto& l : lines)
    {
        s.Add(l);
    }
    return s.Summary();
}

MetricSummary
Summarize(const std::filesystem::path& trace)
{
    MetricScanner s;
    ForEachLine(trace, [&](const TraceLine& l) { s.Add(l); });
    return s.Summary();
}

MetricSeries
ThroughputSeries(const std::vector<TraceLine>& lines,
                 double bucket,
                 std::optional<double> duration,
                 std::optional<std::set<NodeId>> dsts)
{
    if (!(bucket > 0.0))
    {
        throw std::invalid_argument("bucket must be positive");
    }
    MetricScanner scan;
    if (!dsts || !duration)
    {
        for (const auto& l : lines)
        {
            scan.Add(l);
        }
    }
    const std::set<NodeId> targets = dsts ? *dsts : scan.FlowDestinations();
    const double span = duration ? *duration : ToSeconds(scan.LastTime());
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / bucket - 1e-9)));

    std::vector<uint64_t> bytes(n, 0);
    for (const auto& l : lines)
    {
        const auto* r = std::get_if<TraceRecord>(&l);
        if (!r || r->layer != Layer::Mac || r->evt != TraceEvent::Receive || !targets.contains(r->node))
        {
            continue;
        }
        const double k = std::floor(ToSeconds(r->time) / bucket);
        if (k >= 0.0 && k < static_cast<double>(n))
        {
            bytes[static_cast<std::size_t>(k)] += r->size;
        }
    }
    MetricSeries s;
    s.bucket = bucket;
    s.points.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
    {
        s.points.push_back({static_cast<double>(k) * bucket, static_cast<double>(bytes[k]) / bucket});
    }
    return s;
}

std::optional<double>
FirstDelivery(const std::vector<TraceLine>& lines)
{
    MetricScanner s;
    for (const auto& l : lines)
    {
        s.Add(l);
        if (s.FirstDelivery())
        {
            break;
        }
    }
    return s.FirstDelivery();
}

MetricSummary
Aggregate(const std::vector<MetricSummary>& runs)
{
    if (runs.empty())
    {
        throw std::invalid_argument("aggregate of an empty list");
    }
    MetricSummary out;
    for (const auto& r : runs)
    {
        out.data += r.data;
        out.sourceData += r.sourceData;
        out.routing += r.routing;
        out.ack += r.ack;
        out.total += r.total;
    }
    return out;
}

} // namespace visim
