#include "visim/report.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace visim
{

std::string
FormatNumber(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::size_t
CsvTable::Column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
    {
        throw std::out_of_range("no column " + name);
    }
    return static_cast<std::size_t>(it - header.begin());
}

namespace
{

std::vector<std::string>
SplitCsvLine(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i)
    {
        const char c = line[i];
        if (quoted)
        {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
            {
                cur += '"';
                ++i;
            }
            else if (c == '"')
            {
                quoted = false;
            }
            else
            {
                cur += c;
            }
        }
        else if (c == '"')
        {
            quoted = true;
        }
        else if (c == ',')
        {
            out.push_back(std::move(cur));
            cur.clear();
        }
        else
        {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string
QuoteCsv(const std::string& s)
{
    if (s.find_first_of(",\"") == std::string::npos)
    {
        return s;
    }
    std::string q = "\"";
    for (char c : s)
    {
        q += c;
        if (c == '"')
        {
            q += '"';
        }
    }
    return q + "\"";
}

std::string
Escape(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

double
ParseDouble(const std::string& s)
{
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    {
        throw std::runtime_error("bad number in CSV: '" + s + "'");
    }
    return v;
}

/// 1-2-5 tick step covering [0, hi] in about five intervals.
double
NiceStep(double hi)
{
    if (hi <= 0.0)
    {
        return 1.0;
    }
    const double raw = hi / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
    {
        if (m * mag >= raw)
        {
            return m * mag;
        }
    }
    return 10.0 * mag;
}

std::string
Fixed(double v, int decimals)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

std::string
Tick(double v)
{
    const double r = std::round(v);
    if (std::fabs(v - r) < 1e-9)
    {
        return Fixed(r, 0);
    }
    return FormatNumber(std::round(v * 1e6) / 1e6);
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

constexpr double kW = 720.0;
constexpr double kH = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

struct Frame
{
    double xMin = 0.0;
    double xMax = 1.0;
    double yMax = 1.0;

    double X(double x) const
    {
        return kLeft + (x - xMin) / (xMax - xMin) * (kW - kLeft - kRight);
    }

    double Y(double y) const
    {
        return kH - kBottom - y / yMax * (kH - kTop - kBottom);
    }
};

void
Header(std::ostringstream& os, const std::string& title)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Fixed(kW, 0) << "\" height=\"" << Fixed(kH, 0)
       << "\" viewBox=\"0 0 " << Fixed(kW, 0) << ' ' << Fixed(kH, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << Fixed(kW / 2, 1) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << Escape(title)
       << "</text>\n";
}

void
Axes(std::ostringstream& os, const Frame& f, const std::string& xLabel, const std::string& yLabel, bool xTicks)
{
    const double x0 = kLeft;
    const double x1 = kW - kRight;
    const double y0 = kH - kBottom;
    const double y1 = kTop;
    os << "<g class=\"axes\" stroke=\"black\">\n";
    os << "<line x1=\"" << Fixed(x0, 1) << "\" y1=\"" << Fixed(y0, 1) << "\" x2=\"" << Fixed(x1, 1) << "\" y2=\""
       << Fixed(y0, 1) << "\"/>\n";
    os << "<line x1=\"" << Fixed(x0, 1) << "\" y1=\"" << Fixed(y0, 1) << "\" x2=\"" << Fixed(x0, 1) << "\" y2=\""
       << Fixed(y1, 1) << "\"/>\n";
    os << "</g>\n";
    const double ys = NiceStep(f.yMax);
    for (double v = 0.0; v <= f.yMax + 1e-12; v += ys)
    {
        os << "<text x=\"" << Fixed(x0 - 6, 1) << "\" y=\"" << Fixed(f.Y(v) + 4, 1) << "\" text-anchor=\"end\">"
           << Tick(v) << "</text>\n";
    }
    if (xTicks)
    {
        const double xs = NiceStep(f.xMax - f.xMin);
        for (double v = f.xMin; v <= f.xMax + 1e-12; v += xs)
        {
            os << "<text x=\"" << Fixed(f.X(v), 1) << "\" y=\"" << Fixed(y0 + 16, 1)
               << "\" text-anchor=\"middle\">" << Tick(v) << "</text>\n";
        }
    }
    os << "<text x=\"" << Fixed((x0 + x1) / 2, 1) << "\" y=\"" << Fixed(kH - 14, 1)
       << "\" text-anchor=\"middle\" class=\"x-label\">" << Escape(xLabel) << "</text>\n";
    os << "<text transform=\"translate(20," << Fixed((y0 + y1) / 2, 1)
       << ") rotate(-90)\" text-anchor=\"middle\" class=\"y-label\">" << Escape(yLabel) << "</text>\n";
}

void
Legend(std::ostringstream& os, const std::vector<ChartSeries>& series)
{
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        const double y = kTop + 10 + 20.0 * static_cast<double>(i);
        os << "<rect x=\"" << Fixed(kW - kRight + 20, 1) << "\" y=\"" << Fixed(y - 9, 1)
           << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[i % 6] << "\"/>\n";
        os << "<text x=\"" << Fixed(kW - kRight + 38, 1) << "\" y=\"" << Fixed(y + 1, 1) << "\">"
           << Escape(series[i].name) << "</text>\n";
    }
}

} // namespace

CsvTable
ReadCsv(std::istream& in)
{
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        auto cells = SplitCsvLine(line);
        if (first)
        {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size())
        {
            throw std::runtime_error("CSV row " + std::to_string(t.rows.size() + 2) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (first)
    {
        throw std::runtime_error("CSV has no header");
    }
    return t;
}

void
WriteCsv(std::ostream& out, const CsvTable& table)
{
    auto row = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
        {
            out << (i ? "," : "") << QuoteCsv(cells[i]);
        }
        out << '\n';
    };
    row(table.header);
    for (const auto& r : table.rows)
    {
        row(r);
    }
}

CsvTable
SeriesTable(const std::vector<NamedSeries>& series)
{
    CsvTable t;
    t.header = {"protocol", "t", "value"};
    for (const auto& s : series)
    {
        for (const auto& p : s.series.points)
        {
            t.rows.push_back({s.protocol, FormatNumber(p.t), FormatNumber(p.value)});
        }
    }
    return t;
}

CsvTable
RatioTable(const std::vector<NamedRatio>& ratios)
{
    CsvTable t;
    t.header = {"protocol", "metric", "value", "numerator", "denominator"};
    for (const auto& r : ratios)
    {
        t.rows.push_back({r.protocol,
                          ToString(r.metric),
                          FormatNumber(r.ratio.value),
                          FormatNumber(r.ratio.numerator),
                          FormatNumber(r.ratio.denominator)});
    }
    return t;
}

CsvTable
AggregateTable(const std::vector<std::pair<std::string, MetricSummary>>& rows)
{
    CsvTable t;
    t.header = {"protocol",
                "goodput_packets",
                "goodput_bytes",
                "routing_load_packets",
                "routing_load_bytes",
                "ack_share_packets",
                "ack_share_bytes"};
    for (const auto& [name, s] : rows)
    {
        t.rows.push_back({name,
                          FormatNumber(s.Goodput(Unit::Packets).value),
                          FormatNumber(s.Goodput(Unit::Bytes).value),
                          FormatNumber(s.RoutingLoad(Unit::Packets).value),
                          FormatNumber(s.RoutingLoad(Unit::Bytes).value),
                          FormatNumber(s.AckShare(Unit::Packets).value),
                          FormatNumber(s.AckShare(Unit::Bytes).value)});
    }
    return t;
}

std::string
LineChartSvg(const std::string& title,
             const std::string& xLabel,
             const std::string& yLabel,
             const std::vector<ChartSeries>& series)
{
    Frame f;
    bool any = false;
    for (const auto& s : series)
    {
        for (const auto& [x, y] : s.points)
        {
            f.xMin = any ? std::min(f.xMin, x) : x;
            f.xMax = any ? std::max(f.xMax, x) : x;
            f.yMax = std::max(f.yMax, y);
            any = true;
        }
    }
    if (!any || f.xMax <= f.xMin)
    {
        f.xMin = 0.0;
        f.xMax = std::max(1.0, f.xMax);
    }
    f.yMax = NiceStep(f.yMax) * std::ceil(f.yMax / NiceStep(f.yMax));

    std::ostringstream os;
    Header(os, title);
    Axes(os, f, xLabel, yLabel, true);
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        os << "<polyline class=\"series\" data-name=\"" << Escape(series[i].name) << "\" fill=\"none\" stroke=\""
           << kPalette[i % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < series[i].points.size(); ++k)
        {
            const auto& [x, y] = series[i].points[k];
            os << (k ? " " : "") << Fixed(f.X(x), 2) << ',' << Fixed(f.Y(y), 2);
        }
        os << "\"/>\n";
    }
    Legend(os, series);
    os << "</svg>\n";
    return os.str();
}

std::string
BarChartSvg(const std::string& title,
            const std::string& yLabel,
            const std::vector<std::string>& categories,
            const std::vector<ChartSeries>& series)
{
    Frame f;
    f.xMin = 0.0;
    f.xMax = static_cast<double>(std::max<std::size_t>(1, categories.size()));
    for (const auto& s : series)
    {
        for (const auto& p : s.points)
        {
            f.yMax = std::max(f.yMax, p.second);
        }
    }
    f.yMax = NiceStep(f.yMax) * std::ceil(f.yMax / NiceStep(f.yMax));

    std::ostringstream os;
    Header(os, title);
    Axes(os, f, "", yLabel, false);
    const double groupW = f.X(1.0) - f.X(0.0);
    const double barW = groupW * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
    for (std::size_t c = 0; c < categories.size(); ++c)
    {
        os << "<text x=\"" << Fixed(f.X(static_cast<double>(c) + 0.5), 1) << "\" y=\"" << Fixed(kH - kBottom + 16, 1)
           << "\" text-anchor=\"middle\">" << Escape(categories[c]) << "</text>\n";
    }
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        for (const auto& [x, y] : series[i].points)
        {
            const double left = f.X(x) + groupW * 0.1 + barW * static_cast<double>(i);
            os << "<rect class=\"bar\" data-name=\"" << Escape(series[i].name) << "\" data-value=\""
               << FormatNumber(y) << "\" x=\"" << Fixed(left, 2) << "\" y=\"" << Fixed(f.Y(y), 2) << "\" width=\""
               << Fixed(barW, 2) << "\" height=\"" << Fixed(f.Y(0.0) - f.Y(y), 2) << "\" fill=\"" << kPalette[i % 6]
               << "\"/>\n";
        }
    }
    Legend(os, series);
    os << "</svg>\n";
    return os.str();
}

std::string
ChartFromCsv(const CsvTable& table, const std::string& title)
{
    const auto& h = table.header;
    if (h == std::vector<std::string>{"protocol", "t", "value"})
    {
        std::vector<ChartSeries> series;
        for (const auto& r : table.rows)
        {
            if (series.empty() || series.back().name != r[0])
            {
                series.push_back({r[0], {}});
            }
            series.back().points.emplace_back(ParseDouble(r[1]), ParseDouble(r[2]) / 1000.0);
        }
        return LineChartSvg(title, "Time (seconds)", "Throughput (KB)", series);
    }
    if (h == std::vector<std::string>{"protocol", "metric", "value", "numerator", "denominator"})
    {
        std::vector<std::string> metrics;
        std::vector<ChartSeries> series;
        for (const auto& r : table.rows)
        {
            auto m = std::find(metrics.begin(), metrics.end(), r[1]);
            if (m == metrics.end())
            {
                metrics.push_back(r[1]);
                m = metrics.end() - 1;
            }
            auto s = std::find_if(series.begin(), series.end(), [&](const ChartSeries& c) { return c.name == r[0]; });
            if (s == series.end())
            {
                series.push_back({r[0], {}});
                s = series.end() - 1;
            }
            s->points.emplace_back(static_cast<double>(m - metrics.begin()), ParseDouble(r[2]));
        }
        return BarChartSvg(title, "Ratio", metrics, series);
    }
    if (!h.empty() && h[0] == "protocol" && h.size() >= 2)
    {
        std::vector<std::string> cats(h.begin() + 1, h.end());
        std::vector<ChartSeries> series;
        for (const auto& r : table.rows)
        {
            ChartSeries s{r[0], {}};
            for (std::size_t c = 1; c < r.size(); ++c)
            {
                s.points.emplace_back(static_cast<double>(c - 1), ParseDouble(r[c]));
            }
            series.push_back(std::move(s));
        }
        return BarChartSvg(title, "Ratio", cats, series);
    }
    throw std::runtime_error("unrecognized CSV layout");
}

} // namespace visim
