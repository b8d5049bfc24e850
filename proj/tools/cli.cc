#include "cli.h"

#include "visim/metrics.h"
#include "visim/report.h"
#include "visim/scenario.h"
#include "visim/simulation.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace visim::cli
{

namespace
{

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::filesystem::path
DefaultOutDir()
{
    const char* env = std::getenv("VISIM_OUT_DIR");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path(".");
}

void
EnsureDir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

void
WriteFile(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
    {
        EnsureDir(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.flush();
    if (!out)
    {
        throw IoError("cannot write " + path.string());
    }
}

std::string
CsvText(const CsvTable& t)
{
    std::ostringstream ss;
    WriteCsv(ss, t);
    return ss.str();
}

Protocol
ProtocolArg(const std::string& name)
{
    auto p = ParseProtocol(name);
    if (!p)
    {
        throw UsageError("unknown protocol '" + name + "' (expected aodv, dsr or dsdv)");
    }
    return *p;
}

std::vector<Protocol>
ProtocolList(const std::vector<std::string>& names)
{
    std::vector<Protocol> out;
    for (const auto& n : names)
    {
        const Protocol p = ProtocolArg(n);
        if (std::find(out.begin(), out.end(), p) == out.end())
        {
            out.push_back(p);
        }
    }
    if (out.empty())
    {
        throw UsageError("select at least one protocol");
    }
    return out;
}

/// A built-in id ("1".."3") or a path to a .scn file.
ScenarioSpec
ScenarioArg(const std::string& arg)
{
    if (arg.size() == 1 && arg[0] >= '1' && arg[0] <= '3')
    {
        return Builtin(arg[0] - '0');
    }
    if (arg.find_first_not_of("0123456789") == std::string::npos)
    {
        throw UsageError("unknown scenario " + arg + " (expected 1, 2, 3 or a .scn file)");
    }
    std::ifstream in(arg);
    if (!in)
    {
        throw IoError("cannot open scenario file " + arg);
    }
    try
    {
        return ParseScenario(in);
    }
    catch (const ScenarioError& e)
    {
        throw UsageError(arg + ": " + e.what());
    }
}

std::vector<TraceLine>
Simulate(const ScenarioSpec& spec, Protocol p, uint64_t seed, std::optional<double> duration, const std::string& label)
{
    try
    {
        return RunSimulation(spec, p, seed, duration).trace;
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(label + ": " + e.what());
    }
    catch (const std::exception& e)
    {
        throw SimulationError(label + ": " + e.what());
    }
}

std::string
TraceText(const std::vector<TraceLine>& lines)
{
    std::ostringstream ss;
    WriteTrace(ss, lines);
    return ss.str();
}

/// Keeps the protocol column plus `cols`, for charts drawn from a CSV.
CsvTable
SelectColumns(const CsvTable& t, const std::vector<std::string>& cols)
{
    CsvTable out;
    std::vector<std::size_t> idx{t.Column("protocol")};
    out.header.push_back("protocol");
    for (const auto& c : cols)
    {
        idx.push_back(t.Column(c));
        out.header.push_back(c);
    }
    for (const auto& r : t.rows)
    {
        std::vector<std::string> row;
        for (auto i : idx)
        {
            row.push_back(r.at(i));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Runs `work(i)` for i in [0, n) on up to hardware_concurrency threads.
/// The first exception (by index) is rethrown after all workers stop.
template <typename F>
void
ParallelFor(std::size_t n, F work)
{
    const std::size_t threads = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;)
        {
            try
            {
                work(i);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t)
    {
        pool.emplace_back(loop);
    }
    loop();
    for (auto& t : pool)
    {
        t.join();
    }
    for (auto& e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }
}

// ---------------------------------------------------------------------------

struct RunOptions
{
    std::string name;
    std::string scenario;
    std::vector<std::string> protocols;
    uint64_t seed = 0;
    bool seedSet = false;
    std::string out;
    std::string outDir;
    std::optional<double> duration;
};

int
CmdRun(const RunOptions& o, std::ostream& out)
{
    ScenarioSpec spec;
    Protocol protocol;
    if (!o.name.empty())
    {
        if (!o.scenario.empty() || !o.protocols.empty())
        {
            throw UsageError("give either a run name or --protocols/--scenario, not both");
        }
        RunName rn;
        try
        {
            rn = ResolveName(o.name);
        }
        catch (const std::invalid_argument& e)
        {
            throw UsageError(e.what());
        }
        spec = Builtin(rn.scenarioId);
        protocol = rn.protocol;
    }
    else
    {
        if (o.scenario.empty() || o.protocols.size() != 1)
        {
            throw UsageError("run needs a name (a00..a22) or one --protocols value with --scenario");
        }
        spec = ScenarioArg(o.scenario);
        protocol = ProtocolArg(o.protocols.front());
    }
    const uint64_t seed = o.seedSet ? o.seed : spec.seed;
    const std::string name = RunName{protocol, spec.scenarioId}.Render();
    const std::filesystem::path path =
        o.out.empty() ? (o.outDir.empty() ? DefaultOutDir() : std::filesystem::path(o.outDir)) / (name + ".tr")
                      : std::filesystem::path(o.out);
    const auto lines = Simulate(spec, protocol, seed, o.duration, name);
    WriteFile(path, TraceText(lines));
    out << name << ": " << ToString(protocol) << " on scenario " << spec.scenarioId << ", seed " << seed << ", "
        << lines.size() << " trace lines -> " << path.string() << '\n';
    return kOk;
}

struct CompareOptions
{
    std::string scenario = "1";
    std::vector<std::string> protocols{"aodv", "dsr", "dsdv"};
    std::string metric = "throughput";
    uint64_t seed = 0;
    bool seedSet = false;
    std::string out;
    std::string outDir;
    double bucket = 1.0;
    std::optional<double> duration;
    std::string goodputMode = "network";
};

int
CmdCompare(const CompareOptions& o, std::ostream& out)
{
    const auto protocols = ProtocolList(o.protocols);
    const auto metric = ParseMetric(o.metric);
    if (!metric)
    {
        throw UsageError("unknown metric '" + o.metric + "'");
    }
    const auto mode = ParseGoodputMode(o.goodputMode);
    if (!mode)
    {
        throw UsageError("unknown goodput mode '" + o.goodputMode + "' (expected network or source)");
    }
    if (!(o.bucket > 0.0))
    {
        throw UsageError("--bucket must be positive");
    }
    const ScenarioSpec spec = ScenarioArg(o.scenario);
    const uint64_t seed = o.seedSet ? o.seed : spec.seed;
    const double duration = o.duration.value_or(spec.duration);

    std::vector<std::vector<TraceLine>> traces(protocols.size());
    ParallelFor(protocols.size(), [&](std::size_t i) {
        traces[i] = Simulate(spec, protocols[i], seed, duration, RunName{protocols[i], spec.scenarioId}.Render());
    });

    CsvTable table;
    std::string title;
    if (*metric == Metric::Throughput)
    {
        std::vector<NamedSeries> series;
        for (std::size_t i = 0; i < protocols.size(); ++i)
        {
            series.push_back({ToString(protocols[i]), ThroughputSeries(traces[i], o.bucket, duration)});
        }
        table = SeriesTable(series);
        title = "Throughput vs Time, scenario " + std::to_string(spec.scenarioId);
    }
    else
    {
        std::vector<NamedRatio> ratios;
        for (std::size_t i = 0; i < protocols.size(); ++i)
        {
            try
            {
                ratios.push_back({ToString(protocols[i]), *metric, Summarize(traces[i]).Get(*metric, *mode)});
            }
            catch (const EmptyRunError& e)
            {
                throw SimulationError(std::string(ToString(protocols[i])) + ": " + e.what());
            }
        }
        table = RatioTable(ratios);
        title = std::string(ToString(*metric)) + ", scenario " + std::to_string(spec.scenarioId);
    }

    const std::filesystem::path dir = o.outDir.empty() ? DefaultOutDir() : std::filesystem::path(o.outDir);
    std::filesystem::path csv =
        o.out.empty() ? dir / ("compare_s" + std::to_string(spec.scenarioId) + "_" + o.metric + ".csv")
                      : std::filesystem::path(o.out);
    std::filesystem::path svg = csv;
    svg.replace_extension(".svg");
    const std::string csvText = CsvText(table);
    WriteFile(csv, csvText);
    // The chart is rendered from the CSV text just written.
    std::istringstream back(csvText);
    WriteFile(svg, ChartFromCsv(ReadCsv(back), title));
    out << "wrote " << csv.string() << " and " << svg.string() << '\n';
    return kOk;
}

struct SuiteOptions
{
    std::string outDir;
    std::optional<double> duration;
};

struct SuiteRow
{
    std::string name;
    Protocol protocol;
    int scenarioId;
    uint64_t seed;
    MetricSummary summary;
    double cv = 0.0;
    std::optional<double> firstDelivery;
};

constexpr Protocol kOrder[] = {Protocol::Aodv, Protocol::Dsr, Protocol::Dsdv};

std::string
Fixed(double v, int digits = 4)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

std::string
Report(const std::vector<SuiteRow>& rows, const std::map<Protocol, MetricSummary>& agg)
{
    std::map<Protocol, double> cv;
    std::map<Protocol, int> n;
    for (const auto& r : rows)
    {
        cv[r.protocol] += r.cv;
        ++n[r.protocol];
    }
    for (auto& [p, v] : cv)
    {
        v /= n[p];
    }
    auto gp = [&](Protocol p, Unit u) { return agg.at(p).Goodput(u).value; };
    auto rl = [&](Protocol p, Unit u) { return agg.at(p).RoutingLoad(u).value; };

    std::ostringstream ss;
    ss << "visim suite report\n";
    ss << "runs: " << rows.size() << " (3 scenarios x " << SuiteSeeds().size() << " seeds x 3 protocols)\n";
    ss << "seeds:";
    for (auto s : SuiteSeeds())
    {
        ss << ' ' << s;
    }
    ss << "\n\npooled MAC transmissions, network mode\n";
    ss << std::left << std::setw(6) << "proto" << std::right;
    for (const char* h : {"gp_pkt", "gp_byte", "rl_pkt", "rl_byte", "ack_pkt", "ack_byte", "mean_cv"})
    {
        ss << std::setw(10) << h;
    }
    ss << '\n';
    for (Protocol p : kOrder)
    {
        const auto& s = agg.at(p);
        ss << std::left << std::setw(6) << ToString(p) << std::right;
        for (double v : {s.Goodput(Unit::Packets).value,
                         s.Goodput(Unit::Bytes).value,
                         s.RoutingLoad(Unit::Packets).value,
                         s.RoutingLoad(Unit::Bytes).value,
                         s.AckShare(Unit::Packets).value,
                         s.AckShare(Unit::Bytes).value,
                         cv[p]})
        {
            ss << std::setw(10) << Fixed(v);
        }
        ss << '\n';
    }

    ss << "\npublished reference goodput (packets / bytes)\n";
    ss << "aodv  0.19 / 0.36\ndsr   0.16 / 0.28\ndsdv  0.24 / 0.48\n";

    ss << "\nfirst data delivery (s), default seed\n";
    for (int id = 1; id <= 3; ++id)
    {
        ss << "scenario " << id << ':';
        for (Protocol p : kOrder)
        {
            for (const auto& r : rows)
            {
                if (r.protocol == p && r.scenarioId == id && r.seed == Builtin(id).seed)
                {
                    ss << ' ' << ToString(p) << '=' << (r.firstDelivery ? Fixed(*r.firstDelivery, 3) : "none");
                }
            }
        }
        ss << '\n';
    }

    auto verdict = [](bool ok) { return ok ? "holds" : "does not hold"; };
    const Protocol A = Protocol::Aodv, D = Protocol::Dsr, V = Protocol::Dsdv;
    ss << "\norderings\n";
    for (Unit u : {Unit::Packets, Unit::Bytes})
    {
        const char* un = u == Unit::Packets ? "packets" : "bytes";
        ss << "goodput dsdv > aodv > dsr (" << un << "): " << verdict(gp(V, u) > gp(A, u) && gp(A, u) > gp(D, u))
           << '\n';
        ss << "routing load dsdv lowest (" << un << "): " << verdict(rl(V, u) < rl(A, u) && rl(V, u) < rl(D, u))
           << '\n';
    }
    ss << "throughput cv dsr > dsdv: " << verdict(cv[D] > cv[V]) << '\n';
    return ss.str();
}

int
CmdSuite(const SuiteOptions& o, std::ostream& out)
{
    const std::filesystem::path dir = o.outDir.empty() ? DefaultOutDir() : std::filesystem::path(o.outDir);
    EnsureDir(dir / "traces");

    std::vector<SuiteRow> rows;
    std::vector<ScenarioSpec> specs;
    for (const auto& run : ExpandSuite())
    {
        for (Protocol p : kOrder)
        {
            SuiteRow r;
            r.protocol = p;
            r.scenarioId = run.spec.scenarioId;
            r.seed = run.seed;
            r.name = RunName{p, r.scenarioId}.Render();
            rows.push_back(r);
            specs.push_back(run.spec);
        }
    }

    std::mutex writeMu;
    ParallelFor(rows.size(), [&](std::size_t i) {
        auto& r = rows[i];
        const std::string label = r.name + " seed " + std::to_string(r.seed);
        const auto lines = Simulate(specs[i], r.protocol, r.seed, o.duration, label);
        try
        {
            r.summary = Summarize(lines);
        }
        catch (const EmptyRunError& e)
        {
            throw SimulationError(label + ": " + e.what());
        }
        r.cv = ThroughputSeries(lines, 1.0, o.duration.value_or(specs[i].duration)).NonzeroCv();
        r.firstDelivery = FirstDelivery(lines);
        const std::string text = TraceText(lines);
        std::lock_guard lock(writeMu);
        WriteFile(dir / "traces" / (r.name + "_seed" + std::to_string(r.seed) + ".tr"), text);
    });

    CsvTable runs;
    runs.header = {"name", "protocol", "scenario_id", "seed"};
    for (const char* c : {"goodput_packets",
                          "goodput_bytes",
                          "routing_load_packets",
                          "routing_load_bytes",
                          "ack_share_packets",
                          "ack_share_bytes",
                          "data_packets",
                          "data_bytes",
                          "routing_packets",
                          "routing_bytes",
                          "ack_packets",
                          "ack_bytes",
                          "total_packets",
                          "total_bytes",
                          "throughput_cv",
                          "first_delivery"})
    {
        runs.header.push_back(c);
    }
    std::map<Protocol, std::vector<MetricSummary>> byProtocol;
    for (const auto& r : rows)
    {
        const auto& s = r.summary;
        runs.rows.push_back({r.name,
                             ToString(r.protocol),
                             std::to_string(r.scenarioId),
                             std::to_string(r.seed),
                             FormatNumber(s.Goodput(Unit::Packets).value),
                             FormatNumber(s.Goodput(Unit::Bytes).value),
                             FormatNumber(s.RoutingLoad(Unit::Packets).value),
                             FormatNumber(s.RoutingLoad(Unit::Bytes).value),
                             FormatNumber(s.AckShare(Unit::Packets).value),
                             FormatNumber(s.AckShare(Unit::Bytes).value),
                             std::to_string(s.data.packets),
                             std::to_string(s.data.bytes),
                             std::to_string(s.routing.packets),
                             std::to_string(s.routing.bytes),
                             std::to_string(s.ack.packets),
                             std::to_string(s.ack.bytes),
                             std::to_string(s.total.packets),
                             std::to_string(s.total.bytes),
                             FormatNumber(r.cv),
                             r.firstDelivery ? FormatNumber(*r.firstDelivery) : ""});
        byProtocol[r.protocol].push_back(s);
    }
    std::map<Protocol, MetricSummary> agg;
    std::vector<std::pair<std::string, MetricSummary>> aggRows;
    for (Protocol p : kOrder)
    {
        agg[p] = Aggregate(byProtocol[p]);
        aggRows.emplace_back(ToString(p), agg[p]);
    }
    const CsvTable aggregate = AggregateTable(aggRows);
    const std::string aggText = CsvText(aggregate);
    WriteFile(dir / "runs.csv", CsvText(runs));
    WriteFile(dir / "aggregate.csv", aggText);

    std::istringstream back(aggText);
    const CsvTable reread = ReadCsv(back);
    WriteFile(dir / "goodput.svg",
              ChartFromCsv(SelectColumns(reread, {"goodput_packets", "goodput_bytes"}), "Goodput"));
    WriteFile(dir / "routing_load.svg",
              ChartFromCsv(SelectColumns(reread, {"routing_load_packets", "routing_load_bytes"}), "Routing load"));
    const std::string report = Report(rows, agg);
    WriteFile(dir / "report.txt", report);
    out << report << "wrote " << rows.size() << " traces and reports under " << dir.string() << '\n';
    return kOk;
}

struct PlotOptions
{
    std::string csv;
    std::string out;
    std::string title;
};

int
CmdPlot(const PlotOptions& o, std::ostream& out)
{
    std::ifstream in(o.csv);
    if (!in)
    {
        throw IoError("cannot open " + o.csv);
    }
    CsvTable table;
    std::string svg;
    try
    {
        table = ReadCsv(in);
        svg = ChartFromCsv(table, o.title.empty() ? std::filesystem::path(o.csv).stem().string() : o.title);
    }
    catch (const std::exception& e)
    {
        throw UsageError(o.csv + ": " + e.what());
    }
    std::filesystem::path path = o.out.empty() ? std::filesystem::path(o.csv).replace_extension(".svg")
                                               : std::filesystem::path(o.out);
    WriteFile(path, svg);
    out << "wrote " << path.string() << '\n';
    return kOk;
}

} // namespace

int
Main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mobile ad hoc routing simulator: AODV, DSR and DSDV"};
    app.name("visim");
    app.require_subcommand(1);

    RunOptions runOpt;
    auto* run = app.add_subcommand("run", "Run one simulation and write its trace");
    run->add_option("name", runOpt.name, "Run name a<protocol><scenario>, e.g. a12");
    run->add_option("--scenario", runOpt.scenario, "Scenario id (1-3) or .scn file");
    run->add_option("--protocols", runOpt.protocols, "Protocol (aodv, dsr, dsdv)")->delimiter(',');
    auto* runSeed = run->add_option("--seed", runOpt.seed, "Random seed");
    run->add_option("--out", runOpt.out, "Trace file path");
    run->add_option("--out-dir", runOpt.outDir, "Output directory (default $VISIM_OUT_DIR or .)");
    run->add_option("--duration", runOpt.duration, "Simulated seconds");

    CompareOptions cmpOpt;
    auto* cmp = app.add_subcommand("compare", "Compare protocols on one scenario (CSV + SVG)");
    cmp->add_option("--scenario", cmpOpt.scenario, "Scenario id (1-3) or .scn file")->capture_default_str();
    cmp->add_option("--protocols", cmpOpt.protocols, "Protocols, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    cmp->add_option("--metric",
                    cmpOpt.metric,
                    "throughput|goodput_packets|goodput_bytes|routing_load_packets|routing_load_bytes")
        ->capture_default_str();
    auto* cmpSeed = cmp->add_option("--seed", cmpOpt.seed, "Random seed");
    cmp->add_option("--out", cmpOpt.out, "CSV path; the SVG goes next to it");
    cmp->add_option("--out-dir", cmpOpt.outDir, "Output directory (default $VISIM_OUT_DIR or .)");
    cmp->add_option("--bucket", cmpOpt.bucket, "Throughput bucket in seconds")->capture_default_str();
    cmp->add_option("--duration", cmpOpt.duration, "Simulated seconds");
    cmp->add_option("--goodput-mode", cmpOpt.goodputMode, "network|source")->capture_default_str();

    SuiteOptions suiteOpt;
    auto* suite = app.add_subcommand("suite", "Run all 15 scenarios for every protocol");
    suite->add_option("--out-dir", suiteOpt.outDir, "Output directory (default $VISIM_OUT_DIR or .)");
    suite->add_option("--duration", suiteOpt.duration, "Simulated seconds per run");

    PlotOptions plotOpt;
    auto* plot = app.add_subcommand("plot", "Render an SVG chart from a CSV written by compare or suite");
    plot->add_option("csv", plotOpt.csv, "CSV file")->required();
    plot->add_option("--out", plotOpt.out, "SVG path (default: CSV path with .svg)");
    plot->add_option("--title", plotOpt.title, "Chart title");

    std::vector<std::string> argvStore{"visim"};
    argvStore.insert(argvStore.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argvStore)
    {
        argv.push_back(a.data());
    }
    try
    {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::ParseError& e)
    {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try
    {
        if (*run)
        {
            runOpt.seedSet = runSeed->count() > 0;
            return CmdRun(runOpt, out);
        }
        if (*cmp)
        {
            cmpOpt.seedSet = cmpSeed->count() > 0;
            return CmdCompare(cmpOpt, out);
        }
        if (*suite)
        {
            return CmdSuite(suiteOpt, out);
        }
        return CmdPlot(plotOpt, out);
    }
    catch (const UsageError& e)
    {
        err << "visim: " << e.what() << '\n';
        return kUsage;
    }
    catch (const IoError& e)
    {
        err << "visim: " << e.what() << '\n';
        return kIo;
    }
    catch (const SimulationError& e)
    {
        err << "visim: simulation failed: " << e.what() << '\n';
        return kSimulation;
    }
    catch (const std::exception& e)
    {
        err << "visim: " << e.what() << '\n';
        return kSimulation;
    }
}

} // namespace visim::cli
