#include "visim/channel.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace visim
{

double
Distance(Vec2 a, Vec2 b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double
ChannelParams::CrossoverDistance() const
{
    return 4.0 * std::numbers::pi * txHeight * rxHeight / wavelength;
}

double
ChannelParams::TxRange() const
{
    return RangeForPower(rxThreshold, *this);
}

double
ChannelParams::CsRange() const
{
    return RangeForPower(csThreshold, *this);
}

ChannelParams
ChannelParams::Default()
{
    return WithRanges(250.0, 550.0);
}

ChannelParams
ChannelParams::WithRanges(double txRange, double csRange)
{
    if (!(txRange > 0.0) || csRange < txRange)
    {
        throw std::invalid_argument("need 0 < txRange <= csRange");
    }
    ChannelParams ch;
    ch.rxThreshold = ReceivedPower(txRange, ch);
    ch.csThreshold = ReceivedPower(csRange, ch);
    return ch;
}

double
ReceivedPower(double d, const ChannelParams& ch)
{
    if (!(d > 0.0))
    {
        throw std::invalid_argument("received power undefined at zero distance");
    }
    if (d <= ch.CrossoverDistance())
    {
        const double fourPiD = 4.0 * std::numbers::pi * d;
        return ch.txPower * ch.txGain * ch.rxGain * ch.wavelength * ch.wavelength /
               (fourPiD * fourPiD * ch.systemLoss);
    }
    const double hh = ch.txHeight * ch.rxHeight;
    return ch.txPower * ch.txGain * ch.rxGain * hh * hh / (d * d * d * d * ch.systemLoss);
}

double
ReceivedPower(Vec2 tx, Vec2 rx, const ChannelParams& ch)
{
    const double d = Distance(tx, rx);
    if (d == 0.0)
    {
        throw std::invalid_argument("transmitter and receiver are co-located");
    }
    return ReceivedPower(d, ch);
}

double
RangeForPower(double power, const ChannelParams& ch)
{
    if (!(power > 0.0))
    {
        throw std::invalid_argument("power threshold must be positive");
    }
    const double dc = ch.CrossoverDistance();
    if (power <= ReceivedPower(dc, ch))
    {
        const double hh = ch.txHeight * ch.rxHeight;
        return std::pow(ch.txPower * ch.txGain * ch.rxGain * hh * hh / (power * ch.systemLoss), 0.25);
    }
    return ch.wavelength / (4.0 * std::numbers::pi) *
           std::sqrt(ch.txPower * ch.txGain * ch.rxGain / (power * ch.systemLoss));
}

} // namespace visim
