#ifndef VISIM_REPORT_H
#define VISIM_REPORT_H

#include "visim/metrics.h"

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace visim
{

/// Shortest text that parses back to the same double.
std::string FormatNumber(double v);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::out_of_range when absent.
    std::size_t Column(const std::string& name) const;
};

/// Minimal RFC 4180 reader (no embedded newlines). Throws std::runtime_error
/// on ragged rows.
CsvTable ReadCsv(std::istream& in);
void WriteCsv(std::ostream& out, const CsvTable& table);

struct NamedSeries
{
    std::string protocol;
    MetricSeries series;
};

struct NamedRatio
{
    std::string protocol;
    Metric metric = Metric::GoodputPackets;
    Ratio ratio;
};

/// protocol,t,value
CsvTable SeriesTable(const std::vector<NamedSeries>& series);
/// protocol,metric,value,numerator,denominator
CsvTable RatioTable(const std::vector<NamedRatio>& ratios);
/// protocol plus the four ratio columns and both ack shares.
CsvTable AggregateTable(const std::vector<std::pair<std::string, MetricSummary>>& rows);

struct ChartSeries
{
    std::string name;
    std::vector<std::pair<double, double>> points;
};

std::string LineChartSvg(const std::string& title,
                         const std::string& xLabel,
                         const std::string& yLabel,
                         const std::vector<ChartSeries>& series);

/// One group per category, one bar per series inside each group.
std::string BarChartSvg(const std::string& title,
                        const std::string& yLabel,
                        const std::vector<std::string>& categories,
                        const std::vector<ChartSeries>& series);

/**
 * Renders a chart from one of the CSV layouts above, using only the CSV
 * values. Throughput series are drawn in KB/s against seconds.
 */
std::string ChartFromCsv(const CsvTable& table, const std::string& title);

} // namespace visim

#endif // VISIM_REPORT_H
