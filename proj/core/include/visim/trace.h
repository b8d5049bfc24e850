#ifndef VISIM_TRACE_H
#define VISIM_TRACE_H

#include "visim/packet.h"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace visim
{

/// Trace timestamps are kept in integer microseconds so that a written
/// record parses back to the identical value.
using Micros = int64_t;

Micros ToMicros(double seconds);

inline double
ToSeconds(Micros us)
{
    return static_cast<double>(us) / 1e6;
}

enum class TraceEvent : uint8_t
{
    Send,
    Receive,
    Drop,
    Forward,
};

enum class Layer : uint8_t
{
    Agt,
    Rtr,
    Mac,
};

/**
 * Drop reasons.
 *   IFQ  interface queue (or routing send buffer) full
 *   RET  MAC retries exhausted
 *   CBK  discarded by routing after a link-failure callback
 *   COL  collision at the receiver
 *   NRTE no usable route (discovery failed, buffer timeout, stale reverse path)
 */
enum class DropReason : uint8_t
{
    None,
    Ifq,
    Ret,
    Cbk,
    Col,
    Nrte,
};

const char* ToString(TraceEvent e);
const char* ToString(Layer l);
const char* ToString(DropReason r);

struct TraceRecord
{
    TraceEvent evt = TraceEvent::Send;
    Micros time = 0;
    NodeId node = 0;
    Layer layer = Layer::Mac;
    PacketUid uid = 0;
    PacketClass cls = PacketClass::Data;
    uint32_t size = kDataSize;
    NodeId src = 0;
    NodeId dst = 0;
    DropReason reason = DropReason::None;

    bool operator==(const TraceRecord&) const = default;
};

/// Node position sample. Coordinates and speed are in hundredths.
struct MobilityRecord
{
    Micros time = 0;
    NodeId node = 0;
    int64_t xCenti = 0;
    int64_t yCenti = 0;
    int64_t speedCenti = 0;

    double X() const
    {
        return static_cast<double>(xCenti) / 100.0;
    }

    double Y() const
    {
        return static_cast<double>(yCenti) / 100.0;
    }

    double Speed() const
    {
        return static_cast<double>(speedCenti) / 100.0;
    }

    static MobilityRecord Make(double t, NodeId node, double x, double y, double speed);

    bool operator==(const MobilityRecord&) const = default;
};

using TraceLine = std::variant<TraceRecord, MobilityRecord>;

inline Micros
TimeOf(const TraceLine& line)
{
    return std::visit([](const auto& r) { return r.time; }, line);
}

class TraceError : public std::runtime_error
{
  public:
    TraceError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          m_line(line)
    {
    }

    std::size_t Line() const
    {
        return m_line;
    }

  private:
    std::size_t m_line;
};

/// Empty string when valid, otherwise the violated rule.
std::string Validate(const TraceRecord& rec);

/// Renders one line without the trailing newline. Throws std::invalid_argument
/// when the record violates the size/class invariants.
std::string FormatRecord(const TraceRecord& rec);
std::string FormatRecord(const MobilityRecord& rec);
std::string FormatLine(const TraceLine& line);

/// Inverse of FormatLine; throws TraceError carrying lineNo on bad input.
TraceLine ParseLine(std::string_view text, std::size_t lineNo = 1);

/// Streams every record in file order to visit. Throws on a missing file or
/// the first malformed line.
void ForEachLine(const std::filesystem::path& path, const std::function<void(const TraceLine&)>& visit);

std::vector<TraceLine> ReadTrace(const std::filesystem::path& path);
std::vector<TraceLine> ReadTrace(std::istream& in);

void WriteTrace(std::ostream& out, const std::vector<TraceLine>& lines);

/// Receives records as the simulator produces them.
class TraceSink
{
  public:
    virtual ~TraceSink() = default;
    virtual void Write(const TraceLine& line) = 0;
};

/// Keeps everything in memory; used by the runner and tests.
class MemoryTrace : public TraceSink
{
  public:
    void Write(const TraceLine& line) override
    {
        m_lines.push_back(line);
    }

    const std::vector<TraceLine>& Lines() const
    {
        return m_lines;
    }

    std::vector<TraceLine> Take()
    {
        return std::move(m_lines);
    }

  private:
    std::vector<TraceLine> m_lines;
};

/// Writes lines to a stream, LF-terminated.
class StreamTrace : public TraceSink
{
  public:
    explicit StreamTrace(std::ostream& out)
        : m_out(out)
    {
    }

    void Write(const TraceLine& line) override;

  private:
    std::ostream& m_out;
};

} // namespace visim

#endif // VISIM_TRACE_H
