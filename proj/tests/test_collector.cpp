#include <gtest/gtest.h>

#include "dfisim/collector.hpp"

using namespace dfisim;

namespace {

constexpr std::uint32_t kChannel = 0x200;
constexpr std::uint32_t kFifo = kFifoBase;

struct Harness {
  std::vector<Record> records;
  Collector c;

  explicit Harness(CollectorConfig cfg = {})
      : c(cfg, [this](const Record& r) { records.push_back(r); }) {
    c.observe_store(kChannel, kDfiDummy);
    c.observe_store(kFifo, kPacketDummy);
  }

  void store(std::uint16_t id, std::uint32_t addr) {
    c.observe_store(addr, 0);
    c.observe_store(kChannel, encode_basic_info(AccessType::Store, InstructionId{id}));
  }
  void load(std::uint16_t id, std::uint32_t addr) {
    c.observe_load(addr);
    c.observe_store(kChannel, encode_basic_info(AccessType::Load, InstructionId{id}));
  }
  /// Decodes everything before the end-of-stream record.
  PacketBuffer packets() {
    EXPECT_FALSE(records.empty());
    EXPECT_EQ(records.back().bits, kEndOfStream);
    auto decoded = decompress_records({records.begin(), records.end() - 1});
    EXPECT_TRUE(decoded);
    return decoded ? *decoded : PacketBuffer{};
  }
};

CollectorConfig plain() {
  CollectorConfig cfg;
  cfg.opts = OptSet{};
  cfg.compression = false;
  return cfg;
}

} // namespace

TEST(Collector, DummiesSetTheChannelAddresses) {
  Harness h;
  EXPECT_EQ(h.c.dfi_global(), kChannel);
  EXPECT_EQ(h.c.packet_mem_addr(), kFifo);
  EXPECT_EQ(h.c.generated(), 0u);
}

TEST(Collector, BasicPacketUsesTheLatchedAddress) {
  Harness h(plain());
  h.store(1, 0x100);
  h.load(6, 0x104);
  h.c.finish();
  EXPECT_EQ(h.packets(), (PacketBuffer{{BasicPacket{AccessType::Store, InstructionId{1}, 0x100}, 0},
                                       {BasicPacket{AccessType::Load, InstructionId{6}, 0x104}, 1}}));
  EXPECT_EQ(h.c.metrics().baseline_bytes, 8u + 8u + 8u);
  EXPECT_TRUE(h.c.violations().empty());
}

TEST(Collector, LibrarySequenceBecomesOnePacket) {
  Harness h(plain());
  const auto header = encode_library_header(InstructionId{7}, true, true, false);
  for (std::uint32_t w : {header, 0x300u, 0x100u, 30u})
    h.c.observe_store(kChannel, w);
  h.c.finish();
  const auto got = h.packets();
  ASSERT_EQ(got.size(), 1u);
  const auto* lib = as_library(got[0]);
  ASSERT_TRUE(lib);
  EXPECT_EQ(lib->load_addr, 0x300u);
  EXPECT_EQ(lib->store_addr, 0x100u);
  EXPECT_EQ(lib->len_words, 8u); // 30 bytes round up to 8 words
}

TEST(Collector, SixtyFourBitLengthTakesTwoWords) {
  Harness h(plain());
  for (std::uint32_t w : {encode_library_header(InstructionId{15}, false, true, true), 0x100u, 12u, 9u})
    h.c.observe_store(kChannel, w);
  h.c.finish();
  const auto* lib = as_library(h.packets().at(0));
  ASSERT_TRUE(lib);
  EXPECT_TRUE(lib->len64);
  EXPECT_EQ(lib->len_words, ((std::uint64_t{9} << 32) + 12 + 3) / 4);
}

TEST(Collector, InterruptedSequenceIsMalformed) {
  Harness h(plain());
  h.c.observe_store(kChannel, encode_library_header(InstructionId{7}, true, true, false));
  h.c.observe_store(kChannel, 0x300);
  h.c.observe_store(0x100, 5);
  ASSERT_EQ(h.c.violations().size(), 1u);
  EXPECT_EQ(h.c.violations()[0].kind, ViolationKind::MalformedSequence);
  h.c.observe_store(kChannel, 0x00C00000); // reserved bits
  EXPECT_EQ(h.c.violations().size(), 2u);
}

TEST(Collector, UnterminatedSequenceAtExitIsMalformed) {
  Harness h(plain());
  h.c.observe_store(kChannel, encode_return_info(InstructionId{9}, 0, true));
  h.c.finish();
  ASSERT_EQ(h.c.violations().size(), 1u);
  EXPECT_EQ(h.c.violations()[0].kind, ViolationKind::MalformedSequence);
}

TEST(Collector, StoresIntoTheFifoWindowAreFlagged) {
  Harness h(plain());
  h.c.observe_store(kFifo + 64, 1);
  h.c.observe_store(kFifo + kFifoWindowBytes, 1);
  ASSERT_EQ(h.c.violations().size(), 1u);
  EXPECT_EQ(h.c.violations()[0].kind, ViolationKind::FifoAccessViolation);
  EXPECT_EQ(h.c.violations()[0].addr, kFifo + 64);
}

TEST(Collector, FlushesWhenTheNextPacketWouldOverflow) {
  auto cfg = plain();
  cfg.buffer_bytes = 32;
  Harness h(cfg);
  for (std::uint16_t i = 1; i <= 4; ++i)
    h.store(i, 0x100 + 4 * i);
  EXPECT_EQ(h.c.metrics().flushes, 0u);
  EXPECT_EQ(h.c.occupancy(), 32u);
  h.store(5, 0x300);
  EXPECT_EQ(h.c.metrics().flushes, 1u);
  EXPECT_EQ(h.records.size(), 4u);
  EXPECT_EQ(h.c.occupancy(), 8u);
}

TEST(Collector, BufferSmallerThanTheLargestPacketIsRejected) {
  auto cfg = plain();
  cfg.buffer_bytes = kMinBufferBytes - 1;
  EXPECT_THROW(Collector(cfg, [](const Record&) {}), ConfigError);
}

TEST(Collector, UncompressedRecordsKeepGenerationOrder) {
  auto cfg = plain();
  cfg.buffer_bytes = 64;
  Harness h(cfg);
  for (std::uint16_t i = 1; i <= 40; ++i)
    h.store(i, 0x100 + 8 * (i % 5));
  h.c.finish();
  const auto got = h.packets();
  ASSERT_EQ(got.size(), 40u);
  for (std::size_t i = 0; i < got.size(); ++i)
    EXPECT_EQ(got[i].seq, i);
  EXPECT_EQ(h.c.metrics().wire_bytes, h.c.metrics().baseline_bytes);
}

TEST(Collector, CompressedStrideCostsHalfAWordPerPacket) {
  CollectorConfig cfg;
  cfg.opts = OptSet{};
  Harness h(cfg);
  for (std::uint32_t i = 0; i < 201; ++i)
    h.store(3, 0x1000 + 4 * i);
  h.c.finish();
  EXPECT_EQ(h.c.metrics().wire_bytes, 8u + 100u * 4u + 8u);
  EXPECT_EQ(h.c.metrics().baseline_bytes, 201u * 8u + 8u);
  EXPECT_EQ(h.packets().size(), 201u);
}

TEST(Collector, DoubleDfiStoreIsReportedWhenEnabled) {
  auto cfg = plain();
  cfg.detect_double_dfi_store = true;
  Harness h(cfg);
  h.store(1, 0x100);
  h.c.observe_store(kChannel, encode_basic_info(AccessType::Store, InstructionId{2}));
  ASSERT_EQ(h.c.violations().size(), 1u);
  EXPECT_EQ(h.c.violations()[0].kind, ViolationKind::DoubleDfiStore);
}
