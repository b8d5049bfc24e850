#include "visim/scenario.h"

#include <charconv>
#include <fstream>
#include <queue>
#include <sstream>

namespace visim
{

ScenarioError::ScenarioError(std::string field, const std::string& what, std::size_t line)
    : std::runtime_error((line ? "line " + std::to_string(line) + ": " : std::string()) + field + ": " + what),
      m_field(std::move(field)),
      m_line(line)
{
}

void
ValidateScenario(const ScenarioSpec& s)
{
    if (s.scenarioId < 1 || s.scenarioId > 3)
    {
        throw ScenarioError("scenario_id", "must be 1, 2 or 3");
    }
    if (!(s.duration > 0.0))
    {
        throw ScenarioError("duration", "must be positive");
    }
    if (!(s.area.width > 0.0) || !(s.area.height > 0.0))
    {
        throw ScenarioError("area", "dimensions must be positive");
    }
    if (!(s.txRange > 0.0))
    {
        throw ScenarioError("tx_range", "must be positive");
    }
    if (s.speedMin < 3.0 || s.speedMax > 10.0 || s.speedMin > s.speedMax)
    {
        throw ScenarioError("speed", "range must lie within [3, 10] m/s");
    }
    if (s.pause < 0.0)
    {
        throw ScenarioError("pause", "must be non-negative");
    }
    const std::size_t expected = s.scenarioId == 1 ? 3 : 10;
    if (s.nodes.size() != expected)
    {
        throw ScenarioError("node",
                            "scenario " + std::to_string(s.scenarioId) + " needs " + std::to_string(expected) +
                                " nodes, got " + std::to_string(s.nodes.size()));
    }
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
    {
        if (!s.area.Contains(s.nodes[i].pos))
        {
            throw ScenarioError("node", "node " + std::to_string(i) + " lies outside the area");
        }
    }
    const auto n = static_cast<NodeId>(s.nodes.size());
    for (std::size_t i = 0; i < s.flows.size(); ++i)
    {
        const auto& f = s.flows[i];
        const std::string tag = "flow " + std::to_string(i) + ": ";
        if (f.src < 0 || f.src >= n || f.dst < 0 || f.dst >= n || f.src == f.dst)
        {
            throw ScenarioError("flow", tag + "endpoints must be distinct existing nodes");
        }
        if (f.startTime < 0.0 || f.startTime >= s.duration)
        {
            throw ScenarioError("flow", tag + "start must lie inside the run");
        }
        if (f.window == 0 || !(f.rtoInitial > 0.0) || f.interval < 0.0)
        {
            throw ScenarioError("flow", tag + "window >= 1, rto > 0, interval >= 0 required");
        }
        if (f.dataSize != kDataSize || f.ackSize != kAckSize)
        {
            throw ScenarioError("flow", tag + "packet sizes are fixed at 1040/40 bytes");
        }
    }
}

namespace
{

FlowSpec
Flow(NodeId src, NodeId dst, double start, double interval)
{
    FlowSpec f;
    f.src = src;
    f.dst = dst;
    f.startTime = start;
    f.interval = interval;
    return f;
}

ScenarioSpec
MeshFixture()
{
    ScenarioSpec s;
    s.nodes = {
        {{30, 40}, false},
        {{200, 60}, false},
        {{380, 40}, false},
        {{470, 200}, false},
        {{380, 360}, false},
        {{200, 340}, false},
        {{30, 360}, false},
        {{30, 200}, false},
        {{180, 200}, false},
        {{330, 200}, false},
    };
    s.flows = {Flow(0, 4, 1.0, 0.0), Flow(6, 2, 1.1, 0.0)};
    return s;
}

} // namespace

ScenarioSpec
Builtin(int scenarioId)
{
    ScenarioSpec s;
    switch (scenarioId)
    {
    case 1:
        s.description = "Static three-node chain";
        s.nodes = {{{50, 200}, true}, {{250, 200}, true}, {{450, 200}, true}};
        s.flows = {Flow(0, 2, 1.0, 0.0)};
        break;
    case 2:
        s = MeshFixture();
        s.description = "Ten nodes, moderate mobility";
        s.speedMin = 3.0;
        s.speedMax = 6.0;
        s.pause = 10.0;
        break;
    case 3:
        s = MeshFixture();
        s.description = "Ten nodes, high mobility";
        s.speedMin = 6.0;
        s.speedMax = 10.0;
        s.pause = 0.0;
        break;
    default:
        throw ScenarioError("scenario_id", "unknown built-in scenario " + std::to_string(scenarioId));
    }
    s.scenarioId = scenarioId;
    s.seed = 1;
    return s;
}

bool
InitiallyConnected(const ScenarioSpec& spec)
{
    const std::size_t n = spec.nodes.size();
    if (n == 0)
    {
        return true;
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty())
    {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v = 0; v < n; ++v)
        {
            if (!seen[v] && Distance(spec.nodes[u].pos, spec.nodes[v].pos) <= spec.txRange)
            {
                seen[v] = true;
                ++count;
                q.push(v);
            }
        }
    }
    return count == n;
}

// ---------------------------------------------------------------------------
// .scn text format
// ---------------------------------------------------------------------------

namespace
{

std::string
Num(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T
Field(std::istringstream& in, const std::string& key, std::size_t line)
{
    std::string tok;
    if (!(in >> tok))
    {
        throw ScenarioError(key, "missing value", line);
    }
    T v{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    {
        throw ScenarioError(key, "bad number '" + tok + "'", line);
    }
    return v;
}

void
ExpectEnd(std::istringstream& in, const std::string& key, std::size_t line)
{
    std::string extra;
    if (in >> extra)
    {
        throw ScenarioError(key, "unexpected token '" + extra + "'", line);
    }
}

} // namespace

ScenarioSpec
ParseScenario(std::istream& in)
{
    ScenarioSpec s;
    s.description.clear();
    std::string text;
    std::size_t lineNo = 0;
    bool haveId = false;
    while (std::getline(in, text))
    {
        ++lineNo;
        if (!text.empty() && text.back() == '\r')
        {
            text.pop_back();
        }
        const auto first = text.find_first_not_of(" \t");
        if (first == std::string::npos || text[first] == '#')
        {
            continue;
        }
        std::istringstream ls(text);
        std::string key;
        ls >> key;
        if (key == "scenario_id")
        {
            s.scenarioId = Field<int>(ls, key, lineNo);
            haveId = true;
        }
        else if (key == "description")
        {
            std::string rest;
            std::getline(ls, rest);
            const auto b = rest.find_first_not_of(" \t");
            s.description = b == std::string::npos ? "" : rest.substr(b);
            continue;
        }
        else if (key == "duration")
        {
            s.duration = Field<double>(ls, key, lineNo);
        }
        else if (key == "seed")
        {
            s.seed = Field<uint64_t>(ls, key, lineNo);
        }
        else if (key == "area")
        {
            s.area.width = Field<double>(ls, key, lineNo);
            s.area.height = Field<double>(ls, key, lineNo);
        }
        else if (key == "tx_range")
        {
            s.txRange = Field<double>(ls, key, lineNo);
        }
        else if (key == "speed")
        {
            s.speedMin = Field<double>(ls, key, lineNo);
            s.speedMax = Field<double>(ls, key, lineNo);
        }
        else if (key == "pause")
        {
            s.pause = Field<double>(ls, key, lineNo);
        }
        else if (key == "node")
        {
            NodeSpec n;
            n.pos.x = Field<double>(ls, key, lineNo);
            n.pos.y = Field<double>(ls, key, lineNo);
            std::string flag;
            if (ls >> flag)
            {
                if (flag != "static")
                {
                    throw ScenarioError(key, "unknown flag '" + flag + "'", lineNo);
                }
                n.isStatic = true;
            }
            s.nodes.push_back(n);
        }
        else if (key == "flow")
        {
            FlowSpec f;
            f.src = Field<NodeId>(ls, key, lineNo);
            f.dst = Field<NodeId>(ls, key, lineNo);
            f.startTime = Field<double>(ls, key, lineNo);
            if (ls >> std::ws && !ls.eof())
            {
                f.window = Field<uint32_t>(ls, key, lineNo);
                f.rtoInitial = Field<double>(ls, key, lineNo);
                f.interval = Field<double>(ls, key, lineNo);
            }
            s.flows.push_back(f);
        }
        else
        {
            throw ScenarioError(key, "unknown key", lineNo);
        }
        ExpectEnd(ls, key, lineNo);
    }
    if (!haveId)
    {
        throw ScenarioError("scenario_id", "missing");
    }
    ValidateScenario(s);
    return s;
}

ScenarioSpec
LoadScenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open scenario file " + path.string());
    }
    return ParseScenario(in);
}

void
WriteScenario(std::ostream& out, const ScenarioSpec& s)
{
    out << "scenario_id " << s.scenarioId << '\n';
    if (!s.description.empty())
    {
        out << "description " << s.description << '\n';
    }
    out << "duration " << Num(s.duration) << '\n';
    out << "seed " << s.seed << '\n';
    out << "area " << Num(s.area.width) << ' ' << Num(s.area.height) << '\n';
    out << "tx_range " << Num(s.txRange) << '\n';
    out << "speed " << Num(s.speedMin) << ' ' << Num(s.speedMax) << '\n';
    out << "pause " << Num(s.pause) << '\n';
    out << "# node x y [static]\n";
    for (const auto& n : s.nodes)
    {
        out << "node " << Num(n.pos.x) << ' ' << Num(n.pos.y) << (n.isStatic ? " static" : "") << '\n';
    }
    out << "# flow src dst start window rto interval\n";
    for (const auto& f : s.flows)
    {
        out << "flow " << f.src << ' ' << f.dst << ' ' << Num(f.startTime) << ' ' << f.window << ' '
            << Num(f.rtoInitial) << ' ' << Num(f.interval) << '\n';
    }
}

void
SaveScenario(const std::filesystem::path& path, const ScenarioSpec& spec)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write scenario file " + path.string());
    }
    WriteScenario(out, spec);
    if (!out)
    {
        throw std::runtime_error("write failed for " + path.string());
    }
}

// ---------------------------------------------------------------------------
// Naming and the suite
// ---------------------------------------------------------------------------

std::string
RunName::Render() const
{
    std::string s = "a";
    s += static_cast<char>('0' + static_cast<int>(protocol));
    s += static_cast<char>('0' + scenarioId - 1);
    return s;
}

RunName
ResolveName(std::string_view name)
{
    if (name.size() != 3 || name[0] != 'a' || name[1] < '0' || name[1] > '2' || name[2] < '0' || name[2] > '2')
    {
        throw std::invalid_argument("invalid run name '" + std::string(name) + "' (expected a[0-2][0-2])");
    }
    RunName r;
    r.protocol = static_cast<Protocol>(name[1] - '0');
    r.scenarioId = name[2] - '0' + 1;
    return r;
}

const std::vector<uint64_t>&
SuiteSeeds()
{
    static const std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    return seeds;
}

std::vector<SuiteRun>
ExpandSuite()
{
    std::vector<SuiteRun> runs;
    for (int id = 1; id <= 3; ++id)
    {
        for (uint64_t seed : SuiteSeeds())
        {
            ScenarioSpec s = Builtin(id);
            s.seed = seed;
            runs.push_back({s, seed});
        }
    }
    return runs;
}

} // namespace visim
