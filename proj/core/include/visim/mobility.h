#ifndef VISIM_MOBILITY_H
#define VISIM_MOBILITY_H

#include "visim/channel.h"
#include "visim/sim_core.h"

namespace visim
{

struct Area
{
    double width = 500.0;
    double height = 400.0;

    bool Contains(Vec2 p) const
    {
        return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
    }

    bool operator==(const Area&) const = default;
};

/// Random-waypoint parameters for one node.
struct MobilityParams
{
    bool isStatic = false;
    double speedMin = 3.0;  // m/s
    double speedMax = 10.0; // m/s
    double pause = 2.0;     // s

    bool operator==(const MobilityParams&) const = default;
};

struct NodePose
{
    NodeId id = 0;
    Vec2 pos;
    /// Current leg speed; zero while paused or static.
    double speed = 0.0;
    Vec2 waypoint;
    double pauseUntil = 0.0;
    bool moving = false;
};

/// Starts a mobile node on its first leg (or parks a static one) at `now`.
NodePose InitialPose(NodeId id, Vec2 start, double now, const MobilityParams& params, Area area, RngStream& rng);

/**
 * Advances a pose from `now` to `now + dt`. A node heads straight for its
 * waypoint at its leg speed; on arrival it pauses, then draws a new waypoint
 * uniform over the area and a new speed uniform in [speedMin, speedMax].
 * Requires dt > 0.
 */
NodePose StepMobility(const NodePose& pose,
                      double now,
                      double dt,
                      const MobilityParams& params,
                      Area area,
                      RngStream& rng);

} // namespace visim

#endif // VISIM_MOBILITY_H
