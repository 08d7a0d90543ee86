#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "sissle/common/types.hpp"

namespace sissle {

// Min-queue of timed events. Ties on time are broken by insertion sequence, so
// the pop order is a pure function of the push order.
template <class Payload>
class EventQueue {
public:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        Payload payload;
    };

    std::uint64_t push(SimTime at, Payload payload) {
        const std::uint64_t seq = next_seq_++;
        heap_.push(Entry{at, seq, std::move(payload)});
        return seq;
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    SimTime next_time() const { return heap_.top().at; }

    Entry pop() {
        Entry e = heap_.top();
        heap_.pop();
        return e;
    }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace sissle
