#ifndef VISIM_SIMULATION_H
#define VISIM_SIMULATION_H

#include "visim/routing.h"
#include "visim/scenario.h"
#include "visim/trace.h"
#include "visim/world.h"

#include <memory>
#include <optional>
#include <vector>

namespace visim
{

std::unique_ptr<RoutingAgent> MakeAgent(Protocol protocol, NodeServices& node);

struct FlowStats
{
    int64_t delivered = 0;
    int64_t highestAcked = -1;
    uint64_t retransmissions = 0;
};

struct RunStats
{
    uint64_t events = 0;
    std::vector<FlowStats> flows;
};

struct RunResult
{
    Protocol protocol = Protocol::Aodv;
    ScenarioSpec spec;
    uint64_t seed = 0;
    double duration = 0.0;
    std::vector<TraceLine> trace;
    RunStats stats;
};

/// World configuration derived from a scenario (area, ranges).
WorldConfig MakeWorldConfig(const ScenarioSpec& spec);

/**
 * Builds the world for `spec`, runs `protocol` under `seed` until the
 * scenario duration (or `duration` when given) and streams every record
 * to `sink`.
 */
RunStats RunSimulation(const ScenarioSpec& spec,
                       Protocol protocol,
                       uint64_t seed,
                       TraceSink& sink,
                       std::optional<double> duration = std::nullopt);

/// Same, keeping the trace in memory.
RunResult RunSimulation(const ScenarioSpec& spec,
                        Protocol protocol,
                        uint64_t seed,
                        std::optional<double> duration = std::nullopt);

} // namespace visim

#endif // VISIM_SIMULATION_H
