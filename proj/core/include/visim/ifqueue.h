#ifndef VISIM_IFQUEUE_H
#define VISIM_IFQUEUE_H

#include "visim/packet.h"

#include <deque>
#include <optional>

namespace visim
{

/// Outgoing packet plus the MAC hop it is addressed to.
struct Frame
{
    Packet packet;
    NodeId nextHop = kBroadcast;
};

/// Drop-tail FIFO in front of the MAC.
class IfaceQueue
{
  public:
    explicit IfaceQueue(std::size_t capacity = 50)
        : m_capacity(capacity)
    {
    }

    /// False when the queue is full; the frame is not stored.
    bool Enqueue(Frame frame)
    {
        if (m_frames.size() >= m_capacity)
        {
            return false;
        }
        m_frames.push_back(std::move(frame));
        return true;
    }

    std::optional<Frame> Dequeue()
    {
        if (m_frames.empty())
        {
            return std::nullopt;
        }
        Frame f = std::move(m_frames.front());
        m_frames.pop_front();
        return f;
    }

    std::size_t Size() const
    {
        return m_frames.size();
    }

    std::size_t Capacity() const
    {
        return m_capacity;
    }

    bool Empty() const
    {
        return m_frames.empty();
    }

  private:
    std::size_t m_capacity;
    std::deque<Frame> m_frames;
};

} // namespace visim

#endif // VISIM_IFQUEUE_H
