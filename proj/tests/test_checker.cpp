#include <gtest/gtest.h>

#include "dfisim/checker.hpp"

using namespace dfisim;

namespace {

constexpr std::uint32_t kMem = 4096;

RdsMap branch_join_rds() {
  RdsMap rds;
  rds.max_static_id = InstructionId{8};
  rds.entries[InstructionId{6}].insert(InstructionId{5});
  rds.entries[InstructionId{8}].insert(InstructionId{1});
  rds.entries[InstructionId{8}].insert(InstructionId{5});
  return rds;
}

} // namespace

TEST(Checker, LoadFindingAWriterOutsideItsSetIsAViolation) {
  Checker c(branch_join_rds(), kMem);
  EXPECT_FALSE(c.process_basic(AccessType::Store, InstructionId{1}, 0x100));
  const auto v = c.process_basic(AccessType::Load, InstructionId{6}, 0x100);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, ViolationKind::DfiCheckFailure);
  EXPECT_EQ(v->load_id, InstructionId{6});
  EXPECT_EQ(v->found_id, InstructionId{1});
  EXPECT_EQ(v->addr, 0x100u);
  EXPECT_FALSE(c.process_basic(AccessType::Load, InstructionId{8}, 0x100));
}

TEST(Checker, NeverWrittenWordsReadAsZero) {
  Checker c(branch_join_rds(), kMem);
  const auto v = c.process_basic(AccessType::Load, InstructionId{8}, 0x200);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->found_id, kNeverWritten);
}

TEST(Checker, LoadsWithoutAnRdsEntryAllowNothing) {
  Checker c(branch_join_rds(), kMem);
  c.process_basic(AccessType::Store, InstructionId{5}, 0x100);
  EXPECT_TRUE(c.process_basic(AccessType::Load, InstructionId{7}, 0x100));
}

TEST(Checker, ReturnChecksRequireTheExactComposite) {
  Checker c(branch_join_rds(), kMem);
  const InstructionId composite{9};
  c.process_basic(AccessType::Store, composite, 0xFFC);
  EXPECT_FALSE(c.process_basic(AccessType::Load, composite, 0xFFC));
  c.process_basic(AccessType::Store, InstructionId{5}, 0xFFC);
  const auto v = c.process_basic(AccessType::Load, composite, 0xFFC);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->found_id, InstructionId{5});
}

TEST(Checker, CompressedSlotsExpandAgainstTheLastPacket) {
  Checker c(branch_join_rds(), kMem);
  c.process_basic(AccessType::Store, InstructionId{5}, 0x100);
  EXPECT_FALSE(c.process_compressed({AccessType::Store, *encode_float8(4), 0}));
  EXPECT_EQ(c.rdt().get(0x104), InstructionId{5});
  EXPECT_FALSE(c.process_compressed({AccessType::Load, Float8{}, 1}));
  EXPECT_EQ(c.reference().id, InstructionId{6});
}

TEST(Checker, CompressedSlotWithoutReferenceIsMalformed) {
  Checker c(branch_join_rds(), kMem);
  const auto v = c.process_compressed({AccessType::Load, Float8{}, 0});
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, ViolationKind::MalformedSequence);
}

TEST(Checker, LibraryPacketChecksSourceThenWritesDestination) {
  RdsMap rds = branch_join_rds();
  rds.max_static_id = InstructionId{10};
  rds.entries[InstructionId{10}].insert(InstructionId{5});
  Checker c(rds, kMem);
  c.process_basic(AccessType::Store, InstructionId{5}, 0x100);
  c.process_basic(AccessType::Store, InstructionId{1}, 0x104);
  // overlapping copy: words are checked before any is overwritten
  const auto vs = c.process_library(LibraryPacket{InstructionId{10}, 0x100, 0x104, 2, false});
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].addr, 0x104u);
  EXPECT_EQ(vs[0].found_id, InstructionId{1});
  EXPECT_EQ(c.rdt().get(0x104), InstructionId{10});
  EXPECT_EQ(c.rdt().get(0x108), InstructionId{10});
  EXPECT_EQ(c.rdt().get(0x100), InstructionId{5});
}

TEST(Checker, AccessesOutsideMemoryAreConfigErrors) {
  Checker c(branch_join_rds(), kMem);
  EXPECT_THROW(c.process_basic(AccessType::Store, InstructionId{1}, kMem), ConfigError);
  EXPECT_THROW(c.process_library(LibraryPacket{InstructionId{1}, std::nullopt, kMem - 4, 2, false}),
               ConfigError);
  EXPECT_THROW(Rdt(6), ConfigError);
}

TEST(Checker, ConsumeStopsAtEndOfStreamAndMeasuresLatency) {
  Checker c(branch_join_rds(), kMem);
  FifoMemory fifo(16);
  PacketBuffer buf = {{BasicPacket{AccessType::Store, InstructionId{1}, 0x100}, 0},
                      {BasicPacket{AccessType::Load, InstructionId{6}, 0x100}, 1}};
  Reference ref;
  for (const auto& r : compress_buffer(buf, ref, false))
    ASSERT_TRUE(fifo.push(r));
  EXPECT_FALSE(c.consume(fifo, 5));
  ASSERT_EQ(c.violations().size(), 1u);
  EXPECT_EQ(c.violations()[0].packet_index, 3u); // packets 2, 3, 4 were generated before the check
  EXPECT_EQ(c.max_latency(), 3u);
  ASSERT_TRUE(fifo.push(Record{kEndOfStream, {2, 0}}));
  EXPECT_TRUE(c.consume(fifo, 5));
  EXPECT_TRUE(c.finished());
  EXPECT_EQ(c.packets_processed(), 2u);
}
