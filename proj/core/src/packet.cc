#include "visim/packet.h"

namespace visim
{

const char*
ToString(PacketClass c)
{
    switch (c)
    {
    case PacketClass::Data:
        return "data";
    case PacketClass::Ack:
        return "ack";
    case PacketClass::Rreq:
        return "rreq";
    case PacketClass::Rrep:
        return "rrep";
    case PacketClass::Rerr:
        return "rerr";
    case PacketClass::Update:
        return "update";
    }
    return "?";
}

std::optional<PacketClass>
ParsePacketClass(std::string_view token)
{
    if (token == "data")
        return PacketClass::Data;
    if (token == "ack")
        return PacketClass::Ack;
    if (token == "rreq")
        return PacketClass::Rreq;
    if (token == "rrep")
        return PacketClass::Rrep;
    if (token == "rerr")
        return PacketClass::Rerr;
    if (token == "update")
        return PacketClass::Update;
    return std::nullopt;
}

bool
IsRoutingClass(PacketClass c)
{
    return c == PacketClass::Rreq || c == PacketClass::Rrep || c == PacketClass::Rerr ||
           c == PacketClass::Update;
}

uint32_t
NominalSize(PacketClass c)
{
    switch (c)
    {
    case PacketClass::Data:
        return kDataSize;
    case PacketClass::Ack:
        return kAckSize;
    default:
        return kRoutingSize;
    }
}

} // namespace visim
