#pragma once

// Single-producer/single-consumer ring. One slot always stays open, so a
// ring of capacity N holds at most N - 1 entries. tail is written only by
// the producer, head only by the consumer.

#include <atomic>
#include <cstddef>
#include <optional>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/mir.hpp"
#include "dfisim/packet.hpp"

namespace dfisim {

inline constexpr std::size_t kDefaultFifoCapacity = 4096;

template <class T> class SpscRing {
public:
  explicit SpscRing(std::size_t capacity = kDefaultFifoCapacity) : slots_(capacity) {
    if (capacity < 2)
      throw ConfigError("FIFO capacity must be at least 2");
  }

  SpscRing(const SpscRing&) = delete;
  SpscRing& operator=(const SpscRing&) = delete;

  /// false when full (occupancy == capacity - 1).
  bool push(const T& value) {
    const auto tail = tail_.load(std::memory_order_relaxed);
    const auto next = advance(tail);
    if (next == head_.load(std::memory_order_acquire))
      return false;
    slots_[tail] = value;
    tail_.store(next, std::memory_order_release);
    return true;
  }

  /// nullopt when empty (head == tail).
  std::optional<T> pop() {
    const auto head = head_.load(std::memory_order_relaxed);
    if (head == tail_.load(std::memory_order_acquire))
      return std::nullopt;
    T value = slots_[head];
    head_.store(advance(head), std::memory_order_release);
    return value;
  }

  std::size_t capacity() const { return slots_.size(); }

  std::size_t occupancy() const {
    const auto head = head_.load(std::memory_order_acquire);
    const auto tail = tail_.load(std::memory_order_acquire);
    return (tail + slots_.size() - head) % slots_.size();
  }

  bool empty() const { return occupancy() == 0; }
  bool full() const { return occupancy() == slots_.size() - 1; }

  std::size_t head_index() const { return head_.load(std::memory_order_acquire); }
  std::size_t tail_index() const { return tail_.load(std::memory_order_acquire); }

private:
  std::size_t advance(std::size_t i) const { return i + 1 == slots_.size() ? 0 : i + 1; }

  std::vector<T> slots_;
  alignas(64) std::atomic<std::size_t> head_{0};
  alignas(64) std::atomic<std::size_t> tail_{0};
};

/// The packet FIFO in PIM-side memory, based at packet_mem_addr.
class FifoMemory : public SpscRing<Record> {
public:
  explicit FifoMemory(std::size_t capacity_records = kDefaultFifoCapacity,
                      std::uint32_t base_addr = kFifoBase)
      : SpscRing<Record>(capacity_records), base_addr_(base_addr) {}

  std::uint32_t base_addr() const { return base_addr_; }

private:
  std::uint32_t base_addr_;
};

} // namespace dfisim
