#include "visim/server.h"

#include "visim/metrics.h"
#include "visim/simulation.h"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace visim
{

using nlohmann::json;

const char*
ToString(RunStatus s)
{
    switch (s)
    {
    case RunStatus::Queued:
        return "queued";
    case RunStatus::Running:
        return "running";
    case RunStatus::Done:
        return "done";
    case RunStatus::Failed:
        return "failed";
    }
    return "?";
}

namespace
{

constexpr const char* kJson = "application/json; charset=utf-8";

std::optional<RunStatus>
ParseStatus(const std::string& s)
{
    for (auto st : {RunStatus::Queued, RunStatus::Running, RunStatus::Done, RunStatus::Failed})
    {
        if (s == ToString(st))
        {
            return st;
        }
    }
    return std::nullopt;
}

json
HandleJson(const RunHandle& h)
{
    json j{{"run_id", h.runId},
           {"status", ToString(h.status)},
           {"protocol", ToString(h.protocol)},
           {"scenario_id", h.scenarioId},
           {"seed", h.seed}};
    if (!h.error.empty())
    {
        j["error"] = h.error;
    }
    return j;
}

void
Reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void
Error(httplib::Response& res, int status, const std::string& what)
{
    Reply(res, status, json{{"error", what}});
}

/// Writes through a temporary name so readers never see a partial file.
void
WriteAtomically(const std::filesystem::path& path, const std::string& text)
{
    auto tmp = path;
    tmp += ".part";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
        if (!out)
        {
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::optional<double>
NumberParam(const httplib::Request& req, const char* key)
{
    if (!req.has_param(key))
    {
        return std::nullopt;
    }
    const std::string v = req.get_param_value(key);
    std::size_t used = 0;
    double d = 0.0;
    try
    {
        d = std::stod(v, &used);
    }
    catch (const std::exception&)
    {
        throw std::invalid_argument(std::string(key) + ": not a number");
    }
    if (used != v.size() || !std::isfinite(d))
    {
        throw std::invalid_argument(std::string(key) + ": not a number");
    }
    return d;
}

} // namespace

struct CompareServer::Impl
{
    struct Entry
    {
        RunHandle handle;
        double duration = 0.0;
    };

    ServerConfig cfg;
    httplib::Server http;
    bool bound = false;

    mutable std::mutex mu;
    std::condition_variable workCv;
    std::condition_variable idleCv;
    std::map<std::string, Entry> runs;
    std::deque<std::string> queue;
    std::size_t active = 0;
    uint64_t nextId = 1;
    bool stopping = false;
    std::vector<std::thread> workers;

    explicit Impl(ServerConfig c)
        : cfg(std::move(c))
    {
        std::filesystem::create_directories(RunsDir());
        Reindex();
        Routes();
        unsigned n = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
        for (unsigned i = 0; i < n; ++i)
        {
            workers.emplace_back([this] { WorkLoop(); });
        }
    }

    std::filesystem::path RunsDir() const
    {
        return cfg.outDir / "runs";
    }

    std::filesystem::path RunDir(const std::string& id) const
    {
        return RunsDir() / id;
    }

    std::string NewId()
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "run-%06llu", static_cast<unsigned long long>(nextId++));
        return buf;
    }

    void Reindex()
    {
        for (const auto& dirent : std::filesystem::directory_iterator(RunsDir()))
        {
            if (!dirent.is_directory())
            {
                continue;
            }
            const std::string id = dirent.path().filename().string();
            const auto reqPath = dirent.path() / "request.json";
            if (!std::filesystem::exists(reqPath))
            {
                continue;
            }
            try
            {
                std::ifstream in(reqPath);
                const json req = json::parse(in);
                Entry e;
                e.handle.runId = id;
                e.handle.protocol = ParseProtocol(req.at("protocol").get<std::string>()).value();
                e.handle.scenarioId = req.at("scenario_id").get<int>();
                e.handle.seed = req.at("seed").get<uint64_t>();
                e.duration = req.at("duration").get<double>();
                const auto sumPath = dirent.path() / "summary.json";
                if (std::filesystem::exists(sumPath))
                {
                    std::ifstream sin(sumPath);
                    const json sum = json::parse(sin);
                    e.handle.status = ParseStatus(sum.at("status").get<std::string>()).value_or(RunStatus::Failed);
                    e.handle.error = sum.value("error", "");
                }
                else
                {
                    // Stopped before finishing; never re-run implicitly.
                    e.handle.status = RunStatus::Failed;
                    e.handle.error = "interrupted";
                }
                runs[id] = e;
            }
            catch (const std::exception&)
            {
                continue;
            }
            unsigned long long n = 0;
            if (std::sscanf(id.c_str(), "run-%llu", &n) == 1)
            {
                nextId = std::max<uint64_t>(nextId, n + 1);
            }
        }
    }

    void WorkLoop()
    {
        for (;;)
        {
            std::string id;
            Entry e;
            {
                std::unique_lock lock(mu);
                workCv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (stopping)
                {
                    return;
                }
                id = queue.front();
                queue.pop_front();
                ++active;
                runs[id].handle.status = RunStatus::Running;
                e = runs[id];
            }
            json summary{{"run_id", id},
                         {"protocol", ToString(e.handle.protocol)},
                         {"scenario_id", e.handle.scenarioId},
                         {"seed", e.handle.seed},
                         {"duration", e.duration}};
            RunStatus final = RunStatus::Done;
            std::string error;
            try
            {
                Execute(id, e, summary);
            }
            catch (const std::exception& ex)
            {
                final = RunStatus::Failed;
                error = ex.what();
            }
            summary["status"] = ToString(final);
            if (!error.empty())
            {
                summary["error"] = error;
            }
            try
            {
                WriteAtomically(RunDir(id) / "summary.json", summary.dump(2) + "\n");
            }
            catch (const std::exception& ex)
            {
                final = RunStatus::Failed;
                error = ex.what();
            }
            {
                std::lock_guard lock(mu);
                auto& h = runs[id].handle;
                h.status = final;
                h.error = error;
                --active;
            }
            idleCv.notify_all();
        }
    }

    void Execute(const std::string& id, const Entry& e, json& summary)
    {
        ScenarioSpec spec = Builtin(e.handle.scenarioId);
        spec.seed = e.handle.seed;
        const auto trace = RunDir(id) / "trace.tr";
        auto tmp = trace;
        tmp += ".part";
        RunStats stats;
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out)
            {
                throw std::runtime_error("cannot write " + tmp.string());
            }
            StreamTrace sink(out);
            stats = RunSimulation(spec, e.handle.protocol, e.handle.seed, sink, e.duration);
            out.flush();
            if (!out)
            {
                throw std::runtime_error("write failed for " + tmp.string());
            }
        }
        std::filesystem::rename(tmp, trace);
        summary["events"] = stats.events;
        const MetricSummary s = Summarize(trace);
        json counts;
        for (auto [name, t] : {std::pair{"data", s.data},
                               std::pair{"source_data", s.sourceData},
                               std::pair{"routing", s.routing},
                               std::pair{"ack", s.ack},
                               std::pair{"total", s.total}})
        {
            counts[name] = {{"packets", t.packets}, {"bytes", t.bytes}};
        }
        summary["transmissions"] = counts;
    }

    std::optional<Entry> Find(const std::string& id) const
    {
        std::lock_guard lock(mu);
        auto it = runs.find(id);
        if (it == runs.end())
        {
            return std::nullopt;
        }
        return it->second;
    }

    /// Resolves a run that must be finished; writes the error reply and
    /// returns nullopt otherwise.
    std::optional<Entry> FindDone(const std::string& id, httplib::Response& res) const
    {
        auto e = Find(id);
        if (!e)
        {
            Error(res, 404, "unknown run " + id);
            return std::nullopt;
        }
        if (e->handle.status == RunStatus::Failed)
        {
            Error(res, 409, "run failed: " + e->handle.error);
            return std::nullopt;
        }
        if (e->handle.status != RunStatus::Done)
        {
            Error(res, 409, "not ready");
            return std::nullopt;
        }
        return e;
    }

    void Routes()
    {
        // httplib defaults to SO_REUSEPORT, which would let a second server
        // silently share the port.
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        http.Get("/scenarios", [](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            for (int id = 1; id <= 3; ++id)
            {
                const ScenarioSpec s = Builtin(id);
                arr.push_back({{"scenario_id", id},
                               {"node_count", s.nodes.size()},
                               {"description", s.description},
                               {"duration", s.duration},
                               {"area", {s.area.width, s.area.height}},
                               {"tx_range", s.txRange}});
            }
            Reply(res, 200, arr);
        });

        http.Get("/runs", [this](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            std::lock_guard lock(mu);
            for (const auto& [id, e] : runs)
            {
                arr.push_back(HandleJson(e.handle));
            }
            Reply(res, 200, arr);
        });

        http.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) { StartRuns(req, res); });

        http.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto e = Find(req.matches[1]);
            if (!e)
            {
                Error(res, 404, "unknown run " + std::string(req.matches[1]));
                return;
            }
            json j = HandleJson(e->handle);
            j["duration"] = e->duration;
            Reply(res, 200, j);
        });

        http.Get(R"(/runs/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
            Metrics(req, res);
        });

        http.Get(R"(/runs/([^/]+)/timeline)", [this](const httplib::Request& req, httplib::Response& res) {
            Timeline(req, res);
        });

        http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try
            {
                std::rethrow_exception(ep);
            }
            catch (const std::exception& ex)
            {
                Error(res, 500, ex.what());
            }
            catch (...)
            {
                Error(res, 500, "internal error");
            }
        });
    }

    void StartRuns(const httplib::Request& req, httplib::Response& res)
    {
        json body;
        try
        {
            body = json::parse(req.body);
        }
        catch (const json::exception&)
        {
            Error(res, 400, "body is not valid JSON");
            return;
        }
        if (!body.is_object())
        {
            Error(res, 400, "body must be an object");
            return;
        }
        std::vector<Protocol> protocols;
        if (!body.contains("protocols") || !body["protocols"].is_array())
        {
            Error(res, 400, "protocols: array required");
            return;
        }
        for (const auto& p : body["protocols"])
        {
            auto parsed = p.is_string() ? ParseProtocol(p.get<std::string>()) : std::nullopt;
            if (!parsed)
            {
                Error(res, 400, "protocols: unknown entry " + p.dump());
                return;
            }
            if (std::find(protocols.begin(), protocols.end(), *parsed) == protocols.end())
            {
                protocols.push_back(*parsed);
            }
        }
        if (protocols.empty())
        {
            Error(res, 400, "protocols: select at least one");
            return;
        }
        if (!body.contains("scenario_id") || !body["scenario_id"].is_number_integer())
        {
            Error(res, 400, "scenario_id: integer required");
            return;
        }
        const int scenario = body["scenario_id"].get<int>();
        if (scenario < 1 || scenario > 3)
        {
            Error(res, 400, "scenario_id: unknown scenario " + std::to_string(scenario));
            return;
        }
        const ScenarioSpec spec = Builtin(scenario);
        uint64_t seed = spec.seed;
        if (body.contains("seed"))
        {
            if (!body["seed"].is_number_unsigned())
            {
                Error(res, 400, "seed: non-negative integer required");
                return;
            }
            seed = body["seed"].get<uint64_t>();
        }
        double duration = spec.duration;
        if (body.contains("duration"))
        {
            if (!body["duration"].is_number() || !(body["duration"].get<double>() > 0.0))
            {
                Error(res, 400, "duration: positive number required");
                return;
            }
            duration = body["duration"].get<double>();
        }

        json handles = json::array();
        {
            std::lock_guard lock(mu);
            for (Protocol p : protocols)
            {
                Entry e;
                e.handle.runId = NewId();
                e.handle.protocol = p;
                e.handle.scenarioId = scenario;
                e.handle.seed = seed;
                e.duration = duration;
                const auto dir = RunDir(e.handle.runId);
                std::filesystem::create_directories(dir);
                const json request{{"protocol", ToString(p)},
                                   {"scenario_id", scenario},
                                   {"seed", seed},
                                   {"duration", duration}};
                WriteAtomically(dir / "request.json", request.dump(2) + "\n");
                runs[e.handle.runId] = e;
                queue.push_back(e.handle.runId);
                handles.push_back(HandleJson(e.handle));
            }
        }
        workCv.notify_all();
        Reply(res, 202, handles);
    }

    void Metrics(const httplib::Request& req, httplib::Response& res)
    {
        if (!req.has_param("metric"))
        {
            Error(res, 400, "metric: required");
            return;
        }
        const auto metric = ParseMetric(req.get_param_value("metric"));
        if (!metric)
        {
            Error(res, 400, "metric: unknown '" + req.get_param_value("metric") + "'");
            return;
        }
        GoodputMode mode = GoodputMode::Network;
        if (req.has_param("goodput_mode"))
        {
            auto m = ParseGoodputMode(req.get_param_value("goodput_mode"));
            if (!m)
            {
                Error(res, 400, "goodput_mode: expected network or source");
                return;
            }
            mode = *m;
        }
        double bucket = 1.0;
        try
        {
            bucket = NumberParam(req, "bucket").value_or(1.0);
        }
        catch (const std::invalid_argument& ex)
        {
            Error(res, 400, ex.what());
            return;
        }
        if (!(bucket > 0.0))
        {
            Error(res, 400, "bucket: must be positive");
            return;
        }
        auto e = FindDone(req.matches[1], res);
        if (!e)
        {
            return;
        }
        const auto lines = ReadTrace(RunDir(e->handle.runId) / "trace.tr");
        json j{{"run_id", e->handle.runId}, {"protocol", ToString(e->handle.protocol)}, {"metric", ToString(*metric)}};
        if (*metric == Metric::Throughput)
        {
            const MetricSeries series = ThroughputSeries(lines, bucket, e->duration);
            json pts = json::array();
            for (const auto& p : series.points)
            {
                pts.push_back({{"t", p.t}, {"v", p.value}});
            }
            j["bucket"] = series.bucket;
            j["points"] = std::move(pts);
        }
        else
        {
            MetricSummary s;
            try
            {
                s = Summarize(lines);
            }
            catch (const EmptyRunError& ex)
            {
                Error(res, 422, ex.what());
                return;
            }
            const Ratio r = s.Get(*metric, mode);
            j["goodput_mode"] = ToString(mode);
            j["value"] = r.value;
            j["numerator"] = r.numerator;
            j["denominator"] = r.denominator;
        }
        Reply(res, 200, j);
    }

    void Timeline(const httplib::Request& req, httplib::Response& res)
    {
        std::optional<double> from;
        std::optional<double> to;
        try
        {
            from = NumberParam(req, "from");
            to = NumberParam(req, "to");
        }
        catch (const std::invalid_argument& ex)
        {
            Error(res, 400, ex.what());
            return;
        }
        auto e = FindDone(req.matches[1], res);
        if (!e)
        {
            return;
        }
        const double lo = std::clamp(from.value_or(0.0), 0.0, e->duration);
        const double hi = std::clamp(to.value_or(e->duration), 0.0, e->duration);
        if (lo > hi)
        {
            Error(res, 400, "from must not exceed to");
            return;
        }
        const Micros loUs = ToMicros(lo);
        const Micros hiUs = ToMicros(hi);
        json frames = json::array();
        uint64_t seq = 0;
        ForEachLine(RunDir(e->handle.runId) / "trace.tr", [&](const TraceLine& line) {
            const Micros t = TimeOf(line);
            if (t < loUs || t > hiUs)
            {
                return;
            }
            if (const auto* m = std::get_if<MobilityRecord>(&line))
            {
                frames.push_back({{"seq", seq++},
                                  {"t", ToSeconds(t)},
                                  {"kind", "position"},
                                  {"node", m->node},
                                  {"x", m->X()},
                                  {"y", m->Y()},
                                  {"speed", m->Speed()}});
                return;
            }
            const auto& r = std::get<TraceRecord>(line);
            if (r.layer != Layer::Mac)
            {
                return;
            }
            frames.push_back({{"seq", seq++},
                              {"t", ToSeconds(t)},
                              {"kind", "mac"},
                              {"evt", ToString(r.evt)},
                              {"node", r.node},
                              {"uid", r.uid},
                              {"class", ToString(r.cls)},
                              {"size", r.size},
                              {"src", r.src},
                              {"dst", r.dst},
                              {"reason", ToString(r.reason)}});
        });
        Reply(res,
              200,
              json{{"run_id", e->handle.runId},
                   {"from", lo},
                   {"to", hi},
                   {"duration", e->duration},
                   {"frames", std::move(frames)}});
    }

    void Shutdown()
    {
        http.stop();
        {
            std::lock_guard lock(mu);
            if (stopping)
            {
                return;
            }
            stopping = true;
        }
        workCv.notify_all();
        for (auto& w : workers)
        {
            if (w.joinable())
            {
                w.join();
            }
        }
        idleCv.notify_all();
    }
};

CompareServer::CompareServer(ServerConfig cfg)
    : m_impl(std::make_unique<Impl>(std::move(cfg)))
{
}

CompareServer::~CompareServer()
{
    m_impl->Shutdown();
}

int
CompareServer::Bind()
{
    int port = m_impl->cfg.port;
    if (port == 0)
    {
        port = m_impl->http.bind_to_any_port(m_impl->cfg.host);
    }
    else if (!m_impl->http.bind_to_port(m_impl->cfg.host, port))
    {
        port = -1;
    }
    if (port < 0)
    {
        throw std::runtime_error("cannot bind " + m_impl->cfg.host + ":" + std::to_string(m_impl->cfg.port));
    }
    m_impl->bound = true;
    return port;
}

void
CompareServer::Serve()
{
    if (!m_impl->bound)
    {
        throw std::logic_error("Serve() before Bind()");
    }
    m_impl->http.listen_after_bind();
}

void
CompareServer::Stop()
{
    m_impl->Shutdown();
}

void
CompareServer::WaitIdle()
{
    std::unique_lock lock(m_impl->mu);
    m_impl->idleCv.wait(lock, [this] {
        return m_impl->stopping || (m_impl->queue.empty() && m_impl->active == 0);
    });
}

std::vector<RunHandle>
CompareServer::Runs() const
{
    std::lock_guard lock(m_impl->mu);
    std::vector<RunHandle> out;
    for (const auto& [id, e] : m_impl->runs)
    {
        out.push_back(e.handle);
    }
    return out;
}

} // namespace visim
