#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "gen.hpp"
#include "ncio/error.hpp"
#include "ncio/fabric.hpp"
#include "ncio/sieve.hpp"
#include "oracles.hpp"

using namespace ncio;
using Segs = std::vector<Segment>;

namespace {

std::shared_ptr<StorageFile> file_with(const std::vector<std::byte>& image, bool locking = true) {
  auto f = StorageFile::in_memory(StorageFile::Options{locking});
  if (!image.empty()) f->write_contig(0, image);
  return f;
}

std::vector<std::byte> contents(StorageFile& f) {
  std::vector<std::byte> all(static_cast<std::size_t>(f.size()));
  f.read_contig(0, all);
  return all;
}

SieveConfig limits(std::int64_t rd, std::int64_t wr) {
  SieveConfig c;
  c.ind_rd_buffer_size = rd;
  c.ind_wr_buffer_size = wr;
  return c;
}

std::vector<std::pair<std::int64_t, std::int64_t>> spans(const std::vector<Window>& ws) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const Window& w : ws) out.emplace_back(w.lo, w.hi);
  return out;
}

}  // namespace

TEST_CASE("plan_windows examples") {
  const Segs s{{0, 2}, {4, 2}, {8, 2}};
  CHECK(spans(plan_windows(s, 1024)) == std::vector<std::pair<std::int64_t, std::int64_t>>{{0, 10}});
  // The second window opens at the unread half of (4,2) and reaches 8..9
  // because both fit below 5 + 5.
  const auto w5 = plan_windows(s, 5);
  CHECK(spans(w5) == std::vector<std::pair<std::int64_t, std::int64_t>>{{0, 5}, {5, 10}});
  CHECK(w5[0].pieces == Segs{{0, 2}, {4, 1}});
  CHECK(w5[1].pieces == Segs{{5, 1}, {8, 2}});
  CHECK(w5[1].stream_pos == 3);
  CHECK(plan_windows({}, 5).empty());
}

TEST_CASE("plan_windows matches the byte-walk simulation") {
  gen::Rng rng(41);
  for (int iter = 0; iter < 500; ++iter) {
    const Segs segs = gen::segments(rng, gen::uniform(rng, 0, 30), 12, 20);
    const std::int64_t limit = gen::uniform(rng, 1, 64);
    const auto got = plan_windows(segs, limit);
    const auto want = oracle::simulate_windows(segs, limit);
    REQUIRE(got.size() == want.size());
    std::int64_t pos = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].lo == want[i].lo);
      CHECK(got[i].hi == want[i].hi);
      CHECK(got[i].useful() == want[i].useful);
      CHECK(got[i].hi - got[i].lo <= limit);
      CHECK(got[i].stream_pos == pos);
      pos += got[i].useful();
    }
  }
}

TEST_CASE("five pieces in one window cost one read") {
  gen::Rng rng(1);
  const auto image = gen::bytes(rng, 4096);
  auto f = file_with(image);
  const Segs segs{{10, 3}, {40, 5}, {100, 1}, {700, 20}, {2000, 7}};
  std::vector<std::byte> out(36);
  const IoStats s = sieve_read(*f, segs, MutableBuffer(std::span(out)), {});
  CHECK(s.read_calls == 1);
  CHECK(s.bytes_read == 1997);
  CHECK(s.useful_bytes_read == 36);
  CHECK(out == oracle::naive_read(image, segs));
}

TEST_CASE("contiguous request reads only useful bytes") {
  gen::Rng rng(2);
  const auto image = gen::bytes(rng, 512);
  auto f = file_with(image);
  const Segs segs{{64, 200}};
  std::vector<std::byte> out(200);
  const IoStats s = sieve_read(*f, segs, MutableBuffer(std::span(out)), {});
  CHECK(s.read_calls == 1);
  CHECK(s.bytes_read == s.useful_bytes_read);
}

TEST_CASE("10 MB extent with the default buffer needs at most 3 reads") {
  const std::int64_t mb = 1 << 20;
  std::vector<std::byte> image(static_cast<std::size_t>(10 * mb));
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<std::byte>(i * 7);
  auto f = file_with(image);
  Segs segs;
  for (std::int64_t at = 0; at + 100 <= 10 * mb; at += mb / 3) segs.push_back({at, 100});
  segs.push_back({10 * mb - 1, 1});
  std::vector<std::byte> out(static_cast<std::size_t>(total_length(segs)));
  const IoStats s = sieve_read(*f, segs, MutableBuffer(std::span(out)), {});
  CHECK(s.read_calls <= 3);
  CHECK(out == oracle::naive_read(image, segs));
}

TEST_CASE("reading past EOF is an error only for requested bytes") {
  std::vector<std::byte> image(100, std::byte{1});
  auto f = file_with(image);
  std::vector<std::byte> out(4);
  // window runs past EOF but the requested bytes are all present
  CHECK_NOTHROW(sieve_read(*f, Segs{{10, 2}, {98, 2}}, MutableBuffer(std::span(out)), {}));
  try {
    sieve_read(*f, Segs{{10, 2}, {99, 2}}, MutableBuffer(std::span(out)), {});
    FAIL("expected beyond_eof");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::beyond_eof);
  }
}

TEST_CASE("sieve_write preserves holes") {
  std::vector<std::byte> image(8, std::byte{0xFF});
  auto f = file_with(image);
  const std::vector<std::byte> data(4, std::byte{0});
  sieve_write(*f, Segs{{0, 2}, {4, 2}}, ConstBuffer(std::span(data)), {});
  const auto got = contents(*f);
  CHECK(got[2] == std::byte{0xFF});
  CHECK(got[3] == std::byte{0xFF});
  CHECK(got[0] == std::byte{0});
  CHECK(got[5] == std::byte{0});
}

TEST_CASE("single-window write counters") {
  gen::Rng rng(3);
  auto f = file_with(gen::bytes(rng, 1000));
  const Segs segs{{0, 5}, {20, 5}, {40, 5}, {60, 5}, {80, 5}};
  const auto data = gen::bytes(rng, 25);
  const IoStats s = sieve_write(*f, segs, ConstBuffer(std::span<const std::byte>(data)), {});
  CHECK(s.write_calls == 1);
  CHECK(s.read_calls == 1);
  CHECK(s.lock_acquisitions == 1);
  CHECK(s.useful_bytes_written == 25);

  const Segs one{{100, 50}};
  const auto more = gen::bytes(rng, 50);
  const IoStats t = sieve_write(*f, one, ConstBuffer(std::span<const std::byte>(more)), {});
  CHECK(t.write_calls == 1);
  CHECK(t.read_calls == 0);
  CHECK(t.lock_acquisitions == 1);
}

TEST_CASE("no-lock files require fallback") {
  auto f = file_with(std::vector<std::byte>(64), false);
  const std::vector<std::byte> data(4);
  const Segs segs{{0, 2}, {10, 2}};
  try {
    sieve_write(*f, segs, ConstBuffer(std::span<const std::byte>(data)), {});
    FAIL("expected fallback_required");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::fallback_required);
  }
  const IoStats s = write_noncontig(*f, segs, ConstBuffer(std::span<const std::byte>(data)), {});
  CHECK(s.write_calls == 2);
  CHECK(s.lock_acquisitions == 0);
}

TEST_CASE("random lists match the naive oracle") {
  gen::Rng rng(99);
  for (int iter = 0; iter < 200; ++iter) {
    const Segs segs = gen::segments(rng, gen::uniform(rng, 1, 40), 30, 50);
    const std::int64_t end = segs.back().end();
    const auto image = gen::bytes(rng, static_cast<std::size_t>(end + gen::uniform(rng, 0, 30)));
    const SieveConfig cfg = limits(gen::uniform(rng, 1, 300), gen::uniform(rng, 1, 300));

    auto f = file_with(image);
    std::vector<std::byte> out(static_cast<std::size_t>(total_length(segs)));
    const IoStats r = sieve_read(*f, segs, MutableBuffer(std::span(out)), cfg);
    CHECK(out == oracle::naive_read(image, segs));
    CHECK(r.read_calls == static_cast<std::int64_t>(plan_windows(segs, cfg.ind_rd_buffer_size).size()));
    CHECK(r.bytes_read >= r.useful_bytes_read);

    const auto data = gen::bytes(rng, out.size());
    const IoStats w = sieve_write(*f, segs, ConstBuffer(std::span<const std::byte>(data)), cfg);
    auto want = image;
    oracle::naive_write(want, segs, data);
    CHECK(contents(*f) == want);
    CHECK(w.lock_acquisitions == static_cast<std::int64_t>(plan_windows(segs, cfg.ind_wr_buffer_size).size()));
  }
}

TEST_CASE("noncontiguous memory layouts") {
  gen::Rng rng(12);
  for (int iter = 0; iter < 100; ++iter) {
    const Segs segs = gen::segments(rng, gen::uniform(rng, 1, 10), 10, 10);
    const std::int64_t n = total_length(segs);
    // memory: the same byte count spread with gaps
    Segs mem;
    std::int64_t left = n, at = gen::uniform(rng, 0, 4);
    while (left > 0) {
      const std::int64_t len = std::min(left, gen::uniform(rng, 1, 6));
      mem.push_back({at, len});
      at += len + gen::uniform(rng, 1, 4);
      left -= len;
    }
    const FlatRepr layout{mem, n, at};
    const auto image = gen::bytes(rng, static_cast<std::size_t>(segs.back().end()));
    auto f = file_with(image);
    std::vector<std::byte> buf(static_cast<std::size_t>(at), std::byte{0xEE});
    sieve_read(*f, segs, MutableBuffer(std::span(buf), layout), limits(gen::uniform(rng, 1, 40), 8));

    std::vector<std::byte> stream;
    for (const Segment& m : mem) stream.insert(stream.end(), buf.begin() + m.offset, buf.begin() + m.end());
    CHECK(stream == oracle::naive_read(image, segs));
    // gap bytes untouched
    std::int64_t covered = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) covered += buf[i] != std::byte{0xEE};
    CHECK(covered <= n);

    std::vector<std::byte> plain(stream.size());
    read_each(*f, segs, MutableBuffer(std::span(plain)));
    CHECK(plain == stream);
  }
}

TEST_CASE("hole threshold switches to piecewise access") {
  gen::Rng rng(4);
  const auto image = gen::bytes(rng, 10000);
  auto f = file_with(image);
  const Segs segs{{0, 10}, {5000, 10}, {9000, 10}};
  std::vector<std::byte> out(30);
  SieveConfig cfg;
  cfg.hole_threshold = 2.0;
  const IoStats s = sieve_read(*f, segs, MutableBuffer(std::span(out)), cfg);
  CHECK(s.read_calls == 3);
  CHECK(s.bytes_read == 30);
  CHECK(out == oracle::naive_read(image, segs));

  const Segs dense{{0, 10}, {12, 10}, {24, 10}};
  const IoStats d = sieve_read(*f, dense, MutableBuffer(std::span(out)), cfg);
  CHECK(d.read_calls == 1);
}

TEST_CASE("concurrent sieved writes to interleaved byte sets keep every byte") {
  gen::Rng rng(8);
  for (int iter = 0; iter < 20; ++iter) {
    const int n = static_cast<int>(gen::uniform(rng, 2, 6));
    const std::int64_t total = gen::uniform(rng, 200, 3000);
    const auto parts = gen::deal(rng, n, total, 9, 0.0);
    const auto image = gen::bytes(rng, static_cast<std::size_t>(total));
    auto f = file_with(std::vector<std::byte>(static_cast<std::size_t>(total), std::byte{0}));
    const SieveConfig cfg = limits(64, gen::uniform(rng, 8, 200));
    std::vector<std::jthread> ts;
    for (int r = 0; r < n; ++r) {
      ts.emplace_back([&, r] {
        const auto data = oracle::naive_read(image, parts[r]);
        sieve_write(*f, parts[r], ConstBuffer(std::span<const std::byte>(data)), cfg);
      });
    }
    ts.clear();
    CHECK(contents(*f) == image);
  }
}

TEST_CASE("size mismatch and bad limits are rejected") {
  auto f = file_with(std::vector<std::byte>(10));
  std::vector<std::byte> out(3);
  CHECK_THROWS_AS(sieve_read(*f, Segs{{0, 2}}, MutableBuffer(std::span(out)), {}), Error);
  CHECK_THROWS_AS(plan_windows(Segs{{0, 2}}, 0), Error);
  CHECK_THROWS_AS(sieve_read(*f, Segs{{0, 3}}, MutableBuffer(std::span(out)), limits(0, 1)), Error);
}
