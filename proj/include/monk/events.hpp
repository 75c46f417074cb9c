#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "monk/common.hpp"

namespace monk {

// Deterministic event queue: events fire in (time, insertion order). The
// insertion tie-break makes same-instant handling reproducible, which the
// byte-identical artifact contract depends on.
class EventQueue {
 public:
  using Handler = std::function<void()>;

  void post_at(SimTime t, Handler fn) {
    items_.push(Item{t, next_seq_++, std::move(fn)});
  }

  void post_after(SimTime delay, Handler fn) {
    post_at(now_ + delay, std::move(fn));
  }

  SimTime now() const { return now_; }
  bool empty() const { return items_.empty(); }
  SimTime next_time() const { return items_.empty() ? kNever : items_.top().t; }

  // Runs events while their timestamp is <= limit, then advances the clock
  // to limit. Time never moves backwards.
  void run_until(SimTime limit) {
    while (!items_.empty() && items_.top().t <= limit) {
      Item item = std::move(const_cast<Item&>(items_.top()));
      items_.pop();
      now_ = item.t;
      item.fn();
    }
    if (limit > now_) now_ = limit;
  }

 private:
  struct Item {
    SimTime t;
    std::uint64_t seq;
    Handler fn;
    bool operator>(const Item& o) const {
      return t != o.t ? t > o.t : seq > o.seq;
    }
  };

  std::priority_queue<Item, std::vector<Item>, std::greater<>> items_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
};

}  // namespace monk
