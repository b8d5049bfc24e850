#include "visim/mobility.h"

#include <algorithm>
#include <stdexcept>

namespace visim
{

namespace
{

void
DrawLeg(NodePose& pose, const MobilityParams& params, Area area, RngStream& rng)
{
    pose.waypoint = Vec2{rng.Uniform(0.0, area.width), rng.Uniform(0.0, area.height)};
    pose.speed = rng.Uniform(params.speedMin, params.speedMax);
    // Uniform(lo, hi) is half-open; clamp guards the rounding edge.
    pose.speed = std::clamp(pose.speed, params.speedMin, params.speedMax);
    pose.moving = true;
}

Vec2
Clamp(Vec2 p, Area area)
{
    return Vec2{std::clamp(p.x, 0.0, area.width), std::clamp(p.y, 0.0, area.height)};
}

} // namespace

NodePose
InitialPose(NodeId id, Vec2 start, double now, const MobilityParams& params, Area area, RngStream& rng)
{
    NodePose pose;
    pose.id = id;
    pose.pos = start;
    pose.waypoint = start;
    pose.pauseUntil = now;
    if (!params.isStatic)
    {
        DrawLeg(pose, params, area, rng);
    }
    return pose;
}

NodePose
StepMobility(const NodePose& in, double now, double dt, const MobilityParams& params, Area area, RngStream& rng)
{
    if (!(dt > 0.0))
    {
        throw std::invalid_argument("mobility step needs dt > 0");
    }
    NodePose pose = in;
    if (params.isStatic)
    {
        pose.speed = 0.0;
        pose.moving = false;
        return pose;
    }
    double t = now;
    const double end = now + dt;
    // Each iteration finishes a pause or a leg; bounded because every leg
    // takes positive time unless waypoint == position.
    for (int guard = 0; guard < 1000 && t < end; ++guard)
    {
        if (!pose.moving)
        {
            if (pose.pauseUntil > t)
            {
                t = std::min(end, pose.pauseUntil);
                continue;
            }
            DrawLeg(pose, params, area, rng);
        }
        const double remaining = Distance(pose.pos, pose.waypoint);
        const double budget = pose.speed * (end - t);
        if (budget >= remaining)
        {
            t += pose.speed > 0.0 ? remaining / pose.speed : 0.0;
            pose.pos = pose.waypoint;
            pose.moving = false;
            pose.speed = 0.0;
            pose.pauseUntil = t + params.pause;
        }
        else
        {
            const double frac = budget / remaining;
            pose.pos.x += (pose.waypoint.x - pose.pos.x) * frac;
            pose.pos.y += (pose.waypoint.y - pose.pos.y) * frac;
            t = end;
        }
    }
    pose.pos = Clamp(pose.pos, area);
    return pose;
}

} // namespace visim
