#ifndef VISIM_SCENARIO_H
#define VISIM_SCENARIO_H

#include "visim/channel.h"
#include "visim/mobility.h"
#include "visim/routing.h"
#include "visim/traffic.h"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace visim
{

struct NodeSpec
{
    Vec2 pos;
    bool isStatic = false;

    bool operator==(const NodeSpec&) const = default;
};

struct ScenarioSpec
{
    int scenarioId = 1;
    std::string description;
    double duration = 150.0;
    uint64_t seed = 1;
    Area area;
    double txRange = 250.0;
    double speedMin = 3.0;
    double speedMax = 10.0;
    double pause = 2.0;
    std::vector<NodeSpec> nodes;
    std::vector<FlowSpec> flows;

    MobilityParams Mobility(const NodeSpec& n) const
    {
        MobilityParams m;
        m.isStatic = n.isStatic;
        m.speedMin = speedMin;
        m.speedMax = speedMax;
        m.pause = pause;
        return m;
    }

    bool operator==(const ScenarioSpec&) const = default;
};

/// A rejected scenario: `Field()` names the offending key, `Line()` is the
/// 1-based file line or 0 for a semantic check.
class ScenarioError : public std::runtime_error
{
  public:
    ScenarioError(std::string field, const std::string& what, std::size_t line = 0);

    const std::string& Field() const
    {
        return m_field;
    }

    std::size_t Line() const
    {
        return m_line;
    }

  private:
    std::string m_field;
    std::size_t m_line;
};

/// Throws ScenarioError on the first violated invariant.
void ValidateScenario(const ScenarioSpec& spec);

/// Pinned fixture for scenario 1, 2 or 3; throws ScenarioError otherwise.
ScenarioSpec Builtin(int scenarioId);

ScenarioSpec ParseScenario(std::istream& in);
ScenarioSpec LoadScenario(const std::filesystem::path& path);
void WriteScenario(std::ostream& out, const ScenarioSpec& spec);
void SaveScenario(const std::filesystem::path& path, const ScenarioSpec& spec);

/// True when the unit-disk graph over the initial placements is connected.
bool InitiallyConnected(const ScenarioSpec& spec);

struct RunName
{
    Protocol protocol = Protocol::Aodv;
    int scenarioId = 1;

    std::string Render() const;
    bool operator==(const RunName&) const = default;
};

/// "a" + protocol digit (0 AODV, 1 DSR, 2 DSDV) + scenario digit (0..2 for
/// scenarios 1..3). Throws std::invalid_argument otherwise.
RunName ResolveName(std::string_view name);

struct SuiteRun
{
    ScenarioSpec spec;
    uint64_t seed = 0;

    bool operator==(const SuiteRun&) const = default;
};

/// Seed variants applied to every built-in scenario.
const std::vector<uint64_t>& SuiteSeeds();

/// Three built-ins times the pinned seeds, in a fixed order.
std::vector<SuiteRun> ExpandSuite();

} // namespace visim

#endif // VISIM_SCENARIO_H
