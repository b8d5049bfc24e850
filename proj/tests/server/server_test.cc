#include "visim/metrics.h"
#include "visim/server.h"
#include "visim/simulation.h"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <thread>

using namespace visim;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace
{

/// A server on a free port with its own run directory.
class Running
{
  public:
    explicit Running(const fs::path& dir, unsigned workers = 1)
        : m_server(Config(dir, workers))
    {
        m_port = m_server.Bind();
        m_thread = std::thread([this] { m_server.Serve(); });
        m_client = std::make_unique<httplib::Client>("127.0.0.1", m_port);
        m_client->set_read_timeout(30, 0);
    }

    ~Running()
    {
        m_server.Stop();
        m_thread.join();
    }

    static ServerConfig Config(const fs::path& dir, unsigned workers)
    {
        ServerConfig cfg;
        cfg.outDir = dir;
        cfg.port = 0;
        cfg.workers = workers;
        return cfg;
    }

    std::pair<int, json> Get(const std::string& path)
    {
        auto r = m_client->Get(path);
        EXPECT_TRUE(r) << path;
        return {r->status, json::parse(r->body)};
    }

    std::pair<int, json> Post(const std::string& body)
    {
        auto r = m_client->Post("/runs", body, "application/json");
        EXPECT_TRUE(r);
        return {r->status, json::parse(r->body)};
    }

    CompareServer& Server()
    {
        return m_server;
    }

  private:
    CompareServer m_server;
    int m_port = 0;
    std::thread m_thread;
    std::unique_ptr<httplib::Client> m_client;
};

class ServerTest : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        m_dir = fs::temp_directory_path() / (std::string("visim_server_") + info->name());
        fs::remove_all(m_dir);
        fs::create_directories(m_dir);
    }

    void TearDown() override
    {
        fs::remove_all(m_dir);
    }

    fs::path m_dir;
};

} // namespace

TEST_F(ServerTest, ListsScenarios)
{
    Running s(m_dir);
    auto [code, body] = s.Get("/scenarios");
    EXPECT_EQ(code, 200);
    ASSERT_EQ(body.size(), 3u);
    EXPECT_EQ(body[0]["scenario_id"], 1);
    EXPECT_EQ(body[0]["node_count"], 3);
    EXPECT_EQ(body[2]["node_count"], 10);
}

TEST_F(ServerTest, SimulateAllThenPoll)
{
    Running s(m_dir);
    auto [code, handles] = s.Post(R"({"protocols":["aodv","dsr","dsdv"],"scenario_id":1,"duration":20})");
    EXPECT_EQ(code, 202);
    ASSERT_EQ(handles.size(), 3u);
    std::set<std::string> ids;
    for (const auto& h : handles)
    {
        ids.insert(h["run_id"].get<std::string>());
        EXPECT_EQ(h["scenario_id"], 1);
    }
    EXPECT_EQ(ids.size(), 3u);
    s.Server().WaitIdle();
    for (const auto& id : ids)
    {
        auto [c, h] = s.Get("/runs/" + id);
        EXPECT_EQ(c, 200);
        EXPECT_EQ(h["status"], "done");
        EXPECT_TRUE(fs::exists(m_dir / "runs" / id / "trace.tr"));
        EXPECT_TRUE(fs::exists(m_dir / "runs" / id / "summary.json"));
    }
    auto [lc, list] = s.Get("/runs");
    EXPECT_EQ(lc, 200);
    EXPECT_EQ(list.size(), 3u);
}

TEST_F(ServerTest, RejectsBadRequests)
{
    Running s(m_dir);
    EXPECT_EQ(s.Post(R"({"protocols":["aodv"],"scenario_id":9})").first, 400);
    EXPECT_EQ(s.Post(R"({"protocols":[],"scenario_id":1})").first, 400);
    EXPECT_EQ(s.Post(R"({"protocols":["olsr"],"scenario_id":1})").first, 400);
    EXPECT_EQ(s.Post(R"({"scenario_id":1})").first, 400);
    EXPECT_EQ(s.Post(R"({"protocols":["aodv"],"scenario_id":1,"duration":-1})").first, 400);
    EXPECT_EQ(s.Post(R"({"protocols":["aodv"],"scenario_id":1,"seed":-3})").first, 400);
    EXPECT_EQ(s.Post("not json").first, 400);
    EXPECT_EQ(s.Get("/runs/run-999999").first, 404);
    EXPECT_EQ(s.Get("/runs/run-999999/metrics?metric=throughput").first, 404);
    EXPECT_EQ(s.Get("/runs/run-999999/timeline").first, 404);
    EXPECT_TRUE(s.Server().Runs().empty());
}

TEST_F(ServerTest, NotReadyAndForwardOnlyStatus)
{
    Running s(m_dir, 1);
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i)
    {
        auto [c, h] = s.Post(R"({"protocols":["aodv","dsr","dsdv"],"scenario_id":3})");
        ASSERT_EQ(c, 202);
        for (const auto& x : h)
        {
            ids.push_back(x["run_id"]);
        }
    }
    // One worker: the last run cannot have finished yet.
    EXPECT_EQ(s.Get("/runs/" + ids.back() + "/metrics?metric=goodput_packets").first, 409);
    EXPECT_EQ(s.Get("/runs/" + ids.back() + "/timeline").first, 409);
    std::map<std::string, int> last;
    for (int poll = 0; poll < 10000; ++poll)
    {
        bool busy = false;
        for (const auto& h : s.Server().Runs())
        {
            const int st = static_cast<int>(h.status);
            ASSERT_GE(st, last[h.runId]) << h.runId;
            last[h.runId] = st;
            busy |= h.status == RunStatus::Queued || h.status == RunStatus::Running;
        }
        if (!busy)
        {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    for (const auto& h : s.Server().Runs())
    {
        EXPECT_EQ(h.status, RunStatus::Done);
    }
}

TEST_F(ServerTest, MetricsMatchDirectComputation)
{
    Running s(m_dir);
    auto [code, handles] = s.Post(R"({"protocols":["aodv","dsdv"],"scenario_id":2,"seed":4,"duration":40})");
    ASSERT_EQ(code, 202);
    s.Server().WaitIdle();
    for (const auto& h : handles)
    {
        const std::string id = h["run_id"];
        const auto protocol = *ParseProtocol(h["protocol"].get<std::string>());
        const auto run = RunSimulation(Builtin(2), protocol, 4, 40.0);

        auto [tc, tp] = s.Get("/runs/" + id + "/metrics?metric=throughput&bucket=2");
        ASSERT_EQ(tc, 200);
        const auto series = ThroughputSeries(run.trace, 2.0, 40.0);
        ASSERT_EQ(tp["points"].size(), series.points.size());
        bool nonzero = false;
        for (std::size_t i = 0; i < series.points.size(); ++i)
        {
            EXPECT_EQ(tp["points"][i]["t"].get<double>(), series.points[i].t);
            EXPECT_EQ(tp["points"][i]["v"].get<double>(), series.points[i].value);
            nonzero |= series.points[i].value > 0;
        }
        EXPECT_TRUE(nonzero);
        EXPECT_EQ(tp["bucket"], 2.0);

        const auto sum = Summarize(run.trace);
        for (auto m : {Metric::GoodputPackets, Metric::GoodputBytes, Metric::RoutingLoadPackets,
                       Metric::RoutingLoadBytes})
        {
            auto [rc, rp] = s.Get("/runs/" + id + "/metrics?metric=" + ToString(m));
            ASSERT_EQ(rc, 200);
            const auto want = sum.Get(m);
            EXPECT_EQ(rp["value"].get<double>(), want.value);
            EXPECT_EQ(rp["numerator"].get<double>(), want.numerator);
            EXPECT_EQ(rp["denominator"].get<double>(), want.denominator);
            EXPECT_DOUBLE_EQ(rp["value"].get<double>(),
                             rp["numerator"].get<double>() / rp["denominator"].get<double>());
        }
        auto [sc, sp] = s.Get("/runs/" + id + "/metrics?metric=goodput_packets&goodput_mode=source");
        ASSERT_EQ(sc, 200);
        EXPECT_EQ(sp["value"].get<double>(), sum.Goodput(Unit::Packets, GoodputMode::Source).value);
        EXPECT_EQ(s.Get("/runs/" + id + "/metrics").first, 400);
        EXPECT_EQ(s.Get("/runs/" + id + "/metrics?metric=latency").first, 400);
        EXPECT_EQ(s.Get("/runs/" + id + "/metrics?metric=throughput&bucket=0").first, 400);
        EXPECT_EQ(s.Get("/runs/" + id + "/metrics?metric=throughput&bucket=abc").first, 400);
    }
}

TEST_F(ServerTest, TimelineFramesOrderedAndComplete)
{
    Running s(m_dir);
    auto [code, handles] = s.Post(R"({"protocols":["dsr"],"scenario_id":3,"duration":30})");
    ASSERT_EQ(code, 202);
    s.Server().WaitIdle();
    const std::string id = handles[0]["run_id"];
    auto [c, tl] = s.Get("/runs/" + id + "/timeline?from=5&to=12.5");
    ASSERT_EQ(c, 200);
    const auto run = RunSimulation(Builtin(3), Protocol::Dsr, Builtin(3).seed, 30.0);
    std::size_t want = 0;
    for (const auto& l : run.trace)
    {
        const Micros t = TimeOf(l);
        if (t < ToMicros(5.0) || t > ToMicros(12.5))
        {
            continue;
        }
        const auto* r = std::get_if<TraceRecord>(&l);
        want += !r || r->layer == Layer::Mac;
    }
    const auto& frames = tl["frames"];
    EXPECT_EQ(frames.size(), want);
    std::set<int> positioned;
    for (std::size_t i = 0; i < frames.size(); ++i)
    {
        EXPECT_EQ(frames[i]["seq"], i);
        EXPECT_GE(frames[i]["t"].get<double>(), 5.0);
        EXPECT_LE(frames[i]["t"].get<double>(), 12.5);
        if (i > 0)
        {
            ASSERT_LE(frames[i - 1]["t"].get<double>(), frames[i]["t"].get<double>());
        }
        if (frames[i]["kind"] == "position")
        {
            positioned.insert(frames[i]["node"].get<int>());
            EXPECT_GE(frames[i]["x"].get<double>(), 0.0);
            EXPECT_LE(frames[i]["x"].get<double>(), 500.0);
        }
        else
        {
            EXPECT_EQ(frames[i]["kind"], "mac");
        }
    }
    EXPECT_EQ(positioned.size(), 10u);

    auto [wc, whole] = s.Get("/runs/" + id + "/timeline?from=-10&to=1000");
    EXPECT_EQ(wc, 200);
    EXPECT_EQ(whole["from"], 0.0);
    EXPECT_EQ(whole["to"], 30.0);
    EXPECT_EQ(s.Get("/runs/" + id + "/timeline?from=10&to=5").first, 400);
}

TEST_F(ServerTest, RestartReindexesRuns)
{
    std::string first;
    {
        Running s(m_dir);
        auto [code, h] = s.Post(R"({"protocols":["aodv","dsr"],"scenario_id":1,"duration":10})");
        ASSERT_EQ(code, 202);
        s.Server().WaitIdle();
        first = h[0]["run_id"];
    }
    // A run that never finished before a crash.
    fs::create_directories(m_dir / "runs" / "run-000007");
    std::ofstream(m_dir / "runs" / "run-000007" / "request.json")
        << R"({"protocol":"dsdv","scenario_id":2,"seed":1,"duration":10})";

    Running s(m_dir);
    const auto runs = s.Server().Runs();
    ASSERT_EQ(runs.size(), 3u);
    EXPECT_EQ(runs[0].runId, first);
    EXPECT_EQ(runs[0].status, RunStatus::Done);
    EXPECT_EQ(runs[2].runId, "run-000007");
    EXPECT_EQ(runs[2].status, RunStatus::Failed);
    EXPECT_EQ(s.Get("/runs/" + first + "/metrics?metric=goodput_packets").first, 200);
    auto [code, h] = s.Post(R"({"protocols":["aodv"],"scenario_id":1,"duration":5})");
    ASSERT_EQ(code, 202);
    EXPECT_EQ(h[0]["run_id"], "run-000008");
}

TEST_F(ServerTest, BindFailureReported)
{
    Running s(m_dir);
    ServerConfig cfg = Running::Config(m_dir / "other", 1);
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    cfg.port = port;
    CompareServer second(cfg);
    EXPECT_THROW(second.Bind(), std::runtime_error);
}
