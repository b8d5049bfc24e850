#ifndef VISIM_SERVER_H
#define VISIM_SERVER_H

#include "visim/scenario.h"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace visim
{

constexpr int kDefaultServerPort = 8537;

enum class RunStatus : uint8_t
{
    Queued,
    Running,
    Done,
    Failed,
};

const char* ToString(RunStatus s);

struct RunHandle
{
    std::string runId;
    RunStatus status = RunStatus::Queued;
    Protocol protocol = Protocol::Aodv;
    int scenarioId = 1;
    uint64_t seed = 1;
    std::string error;
};

struct ServerConfig
{
    /// Runs live under outDir/runs/<run_id>/.
    std::filesystem::path outDir = ".";
    std::string host = "127.0.0.1";
    /// 0 picks a free port.
    int port = kDefaultServerPort;
    /// Simulation worker threads; 0 means one per hardware thread.
    unsigned workers = 0;
};

/**
 * JSON service over the run directory. Requests are answered on the HTTP
 * threads; simulations run on a separate worker pool and clients poll.
 */
class CompareServer
{
  public:
    explicit CompareServer(ServerConfig cfg);
    ~CompareServer();

    CompareServer(const CompareServer&) = delete;
    CompareServer& operator=(const CompareServer&) = delete;

    /// Binds the listening socket. Returns the bound port; throws
    /// std::runtime_error when the address is unavailable.
    int Bind();

    /// Serves until Stop(). Bind() must have succeeded.
    void Serve();

    void Stop();

    /// Blocks until no run is queued or running.
    void WaitIdle();

    /// Snapshot of every known run, ordered by id.
    std::vector<RunHandle> Runs() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

} // namespace visim

#endif // VISIM_SERVER_H
