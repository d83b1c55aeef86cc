#include <gtest/gtest.h>

#include <thread>

#include "dfisim/fifo.hpp"
#include "oracles.hpp"

using namespace dfisim;

TEST(Fifo, EmptyAndFullFollowTheOpenSlotRule) {
  SpscRing<int> q(4);
  EXPECT_TRUE(q.empty());
  EXPECT_FALSE(q.pop());
  EXPECT_TRUE(q.push(1));
  EXPECT_TRUE(q.push(2));
  EXPECT_TRUE(q.push(3));
  EXPECT_TRUE(q.full());
  EXPECT_FALSE(q.push(4));
  EXPECT_EQ(q.occupancy(), 3u);
  EXPECT_EQ(q.pop(), 1);
  EXPECT_TRUE(q.push(4));
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), 4);
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.head_index(), q.tail_index());
}

TEST(Fifo, CapacityBelowTwoIsRejected) {
  EXPECT_THROW(SpscRing<int>(1), ConfigError);
  EXPECT_NO_THROW(SpscRing<int>(2));
}

TEST(Fifo, MatchesAnUnboundedQueueOverRandomOperations) {
  for (std::size_t cap : {2u, 3u, 7u, 64u})
    EXPECT_EQ(oracle::fifo_mismatches(cap, 100000, cap), 0u) << cap;
}

TEST(Fifo, ThreadedProducerAndConsumerSeeOneOrder) {
  constexpr std::uint64_t kCount = 200000;
  FifoMemory fifo(128);
  std::thread producer([&] {
    for (std::uint64_t i = 0; i < kCount; ++i)
      while (!fifo.push(Record{i, {i, 0}}))
        std::this_thread::yield();
  });
  std::uint64_t expected = 0;
  while (expected < kCount) {
    if (auto r = fifo.pop()) {
      ASSERT_EQ(r->bits, expected);
      ++expected;
    } else {
      std::this_thread::yield();
    }
  }
  producer.join();
  EXPECT_TRUE(fifo.empty());
  EXPECT_EQ(fifo.base_addr(), kFifoBase);
}
