#ifndef VISIM_CHANNEL_H
#define VISIM_CHANNEL_H

namespace visim
{

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

double Distance(Vec2 a, Vec2 b);

/**
 * Two-ray ground propagation with omni antennas. Defaults are the usual
 * 914 MHz WaveLAN figures; the receive threshold is set so the transmission
 * range is 250 m and the carrier-sense threshold so sensing reaches 550 m.
 */
struct ChannelParams
{
    double txPower = 0.28183815;    // W
    double txGain = 1.0;
    double rxGain = 1.0;
    double txHeight = 1.5;          // m
    double rxHeight = 1.5;          // m
    double wavelength = 299792458.0 / 914e6; // m
    double systemLoss = 1.0;
    double rxThreshold = 0.0;       // W, filled by Default()/WithRanges()
    double csThreshold = 0.0;       // W

    double CrossoverDistance() const;

    /// Distance at which the received power equals rxThreshold.
    double TxRange() const;
    /// Distance at which the received power equals csThreshold.
    double CsRange() const;

    static ChannelParams Default();
    static ChannelParams WithRanges(double txRange, double csRange);
};

/// Received power at distance d (> 0). Free-space below the crossover
/// distance, d^-4 above it; the two branches meet at the crossover.
double ReceivedPower(double distance, const ChannelParams& ch);

/// Throws std::invalid_argument for co-located endpoints.
double ReceivedPower(Vec2 tx, Vec2 rx, const ChannelParams& ch);

/// Inverts ReceivedPower: the distance at which the power equals `power`.
double RangeForPower(double power, const ChannelParams& ch);

} // namespace visim

#endif // VISIM_CHANNEL_H
