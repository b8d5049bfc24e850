#include "visim/trace.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace visim
{

Micros
ToMicros(double seconds)
{
    return static_cast<Micros>(std::llround(seconds * 1e6));
}

const char*
ToString(TraceEvent e)
{
    switch (e)
    {
    case TraceEvent::Send:
        return "s";
    case TraceEvent::Receive:
        return "r";
    case TraceEvent::Drop:
        return "d";
    case TraceEvent::Forward:
        return "f";
    }
    return "?";
}

const char*
ToString(Layer l)
{
    switch (l)
    {
    case Layer::Agt:
        return "AGT";
    case Layer::Rtr:
        return "RTR";
    case Layer::Mac:
        return "MAC";
    }
    return "?";
}

const char*
ToString(DropReason r)
{
    switch (r)
    {
    case DropReason::None:
        return "---";
    case DropReason::Ifq:
        return "IFQ";
    case DropReason::Ret:
        return "RET";
    case DropReason::Cbk:
        return "CBK";
    case DropReason::Col:
        return "COL";
    case DropReason::Nrte:
        return "NRTE";
    }
    return "?";
}

MobilityRecord
MobilityRecord::Make(double t, NodeId node, double x, double y, double speed)
{
    MobilityRecord m;
    m.time = ToMicros(t);
    m.node = node;
    m.xCenti = std::llround(x * 100.0);
    m.yCenti = std::llround(y * 100.0);
    m.speedCenti = std::llround(speed * 100.0);
    return m;
}

std::string
Validate(const TraceRecord& rec)
{
    if (rec.time < 0)
    {
        return "negative time";
    }
    if (rec.size == 0)
    {
        return "size must be positive";
    }
    if (rec.size != NominalSize(rec.cls))
    {
        return std::string("class ") + ToString(rec.cls) + " requires size " +
               std::to_string(NominalSize(rec.cls));
    }
    return {};
}

namespace
{

void
AppendTime(std::string& out, Micros us)
{
    char buf[48];
    const bool neg = us < 0;
    const uint64_t mag = neg ? static_cast<uint64_t>(-us) : static_cast<uint64_t>(us);
    std::snprintf(buf,
                  sizeof(buf),
                  "%s%llu.%06llu",
                  neg ? "-" : "",
                  static_cast<unsigned long long>(mag / 1000000),
                  static_cast<unsigned long long>(mag % 1000000));
    out += buf;
}

void
AppendCenti(std::string& out, int64_t v)
{
    char buf[48];
    const bool neg = v < 0;
    const uint64_t mag = neg ? static_cast<uint64_t>(-v) : static_cast<uint64_t>(v);
    std::snprintf(buf,
                  sizeof(buf),
                  "%s%llu.%02llu",
                  neg ? "-" : "",
                  static_cast<unsigned long long>(mag / 100),
                  static_cast<unsigned long long>(mag % 100));
    out += buf;
}

std::vector<std::string_view>
SplitSpaces(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size())
    {
        const std::size_t j = text.find(' ', i);
        if (j == std::string_view::npos)
        {
            out.push_back(text.substr(i));
            break;
        }
        out.push_back(text.substr(i, j - i));
        i = j + 1;
        if (i == text.size())
        {
            out.emplace_back(); // trailing space yields an empty field
        }
    }
    return out;
}

template <typename T>
T
ParseInt(std::string_view tok, std::size_t lineNo, const char* field)
{
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    {
        throw TraceError(lineNo, std::string("bad ") + field + " '" + std::string(tok) + "'");
    }
    return value;
}

/// Parses a fixed-point decimal with exactly `decimals` fractional digits.
int64_t
ParseFixed(std::string_view tok, int decimals, std::size_t lineNo, const char* field)
{
    const std::size_t dot = tok.find('.');
    if (dot == std::string_view::npos || tok.size() - dot - 1 != static_cast<std::size_t>(decimals))
    {
        throw TraceError(lineNo,
                         std::string("bad ") + field + " '" + std::string(tok) + "' (expected " +
                             std::to_string(decimals) + " decimals)");
    }
    std::string_view whole = tok.substr(0, dot);
    const bool neg = !whole.empty() && whole.front() == '-';
    if (neg)
    {
        whole.remove_prefix(1);
    }
    const auto intPart = ParseInt<uint64_t>(whole, lineNo, field);
    const auto fracPart = ParseInt<uint64_t>(tok.substr(dot + 1), lineNo, field);
    int64_t scale = 1;
    for (int i = 0; i < decimals; ++i)
    {
        scale *= 10;
    }
    const int64_t v = static_cast<int64_t>(intPart) * scale + static_cast<int64_t>(fracPart);
    return neg ? -v : v;
}

} // namespace

std::string
FormatRecord(const TraceRecord& rec)
{
    if (auto why = Validate(rec); !why.empty())
    {
        throw std::invalid_argument("invalid trace record: " + why);
    }
    std::string out;
    out.reserve(64);
    out += ToString(rec.evt);
    out += ' ';
    AppendTime(out, rec.time);
    out += ' ';
    out += std::to_string(rec.node);
    out += ' ';
    out += ToString(rec.layer);
    out += ' ';
    out += std::to_string(rec.uid);
    out += ' ';
    out += ToString(rec.cls);
    out += ' ';
    out += std::to_string(rec.size);
    out += ' ';
    out += std::to_string(rec.src);
    out += ' ';
    out += std::to_string(rec.dst);
    out += ' ';
    out += ToString(rec.reason);
    return out;
}

std::string
FormatRecord(const MobilityRecord& rec)
{
    std::string out = "M ";
    AppendTime(out, rec.time);
    out += ' ';
    out += std::to_string(rec.node);
    out += ' ';
    AppendCenti(out, rec.xCenti);
    out += ' ';
    AppendCenti(out, rec.yCenti);
    out += ' ';
    AppendCenti(out, rec.speedCenti);
    return out;
}

std::string
FormatLine(const TraceLine& line)
{
    return std::visit([](const auto& r) { return FormatRecord(r); }, line);
}

TraceLine
ParseLine(std::string_view text, std::size_t lineNo)
{
    if (!text.empty() && text.back() == '\n')
    {
        text.remove_suffix(1);
    }
    const auto tok = SplitSpaces(text);
    if (tok.empty() || tok[0].empty())
    {
        throw TraceError(lineNo, "empty line");
    }
    if (tok[0] == "M")
    {
        if (tok.size() != 6)
        {
            throw TraceError(lineNo, "mobility record needs 6 fields");
        }
        MobilityRecord m;
        m.time = ParseFixed(tok[1], 6, lineNo, "time");
        m.node = ParseInt<NodeId>(tok[2], lineNo, "node");
        m.xCenti = ParseFixed(tok[3], 2, lineNo, "x");
        m.yCenti = ParseFixed(tok[4], 2, lineNo, "y");
        m.speedCenti = ParseFixed(tok[5], 2, lineNo, "speed");
        if (m.time < 0)
        {
            throw TraceError(lineNo, "negative time");
        }
        return m;
    }
    if (tok.size() != 10)
    {
        throw TraceError(lineNo, "event record needs 10 fields, got " + std::to_string(tok.size()));
    }
    TraceRecord r;
    if (tok[0] == "s")
        r.evt = TraceEvent::Send;
    else if (tok[0] == "r")
        r.evt = TraceEvent::Receive;
    else if (tok[0] == "d")
        r.evt = TraceEvent::Drop;
    else if (tok[0] == "f")
        r.evt = TraceEvent::Forward;
    else
        throw TraceError(lineNo, "unknown event '" + std::string(tok[0]) + "'");

    r.time = ParseFixed(tok[1], 6, lineNo, "time");
    r.node = ParseInt<NodeId>(tok[2], lineNo, "node");

    if (tok[3] == "AGT")
        r.layer = Layer::Agt;
    else if (tok[3] == "RTR")
        r.layer = Layer::Rtr;
    else if (tok[3] == "MAC")
        r.layer = Layer::Mac;
    else
        throw TraceError(lineNo, "unknown layer '" + std::string(tok[3]) + "'");

    r.uid = ParseInt<PacketUid>(tok[4], lineNo, "uid");
    const auto cls = ParsePacketClass(tok[5]);
    if (!cls)
    {
        throw TraceError(lineNo, "unknown class '" + std::string(tok[5]) + "'");
    }
    r.cls = *cls;
    r.size = ParseInt<uint32_t>(tok[6], lineNo, "size");
    r.src = ParseInt<NodeId>(tok[7], lineNo, "src");
    r.dst = ParseInt<NodeId>(tok[8], lineNo, "dst");

    bool found = false;
    for (auto reason : {DropReason::None,
                        DropReason::Ifq,
                        DropReason::Ret,
                        DropReason::Cbk,
                        DropReason::Col,
                        DropReason::Nrte})
    {
        if (tok[9] == ToString(reason))
        {
            r.reason = reason;
            found = true;
            break;
        }
    }
    if (!found)
    {
        throw TraceError(lineNo, "unknown reason '" + std::string(tok[9]) + "'");
    }
    if (auto why = Validate(r); !why.empty())
    {
        throw TraceError(lineNo, why);
    }
    return r;
}

namespace
{

void
ForEachLineIn(std::istream& in, const std::function<void(const TraceLine&)>& visit)
{
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        visit(ParseLine(line, lineNo));
    }
}

} // namespace

void
ForEachLine(const std::filesystem::path& path, const std::function<void(const TraceLine&)>& visit)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot open trace file " + path.string());
    }
    ForEachLineIn(in, visit);
}

std::vector<TraceLine>
ReadTrace(const std::filesystem::path& path)
{
    std::vector<TraceLine> out;
    ForEachLine(path, [&](const TraceLine& l) { out.push_back(l); });
    return out;
}

std::vector<TraceLine>
ReadTrace(std::istream& in)
{
    std::vector<TraceLine> out;
    ForEachLineIn(in, [&](const TraceLine& l) { out.push_back(l); });
    return out;
}

void
WriteTrace(std::ostream& out, const std::vector<TraceLine>& lines)
{
    for (const auto& l : lines)
    {
        out << FormatLine(l) << '\n';
    }
}

void
StreamTrace::Write(const TraceLine& line)
{
    m_out << FormatLine(line) << '\n';
}

} // namespace visim
