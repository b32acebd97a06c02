#include "ncio/collective.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "checked.hpp"
#include "ncio/error.hpp"

namespace ncio {

namespace {

// Tags inside the user range. Access lists use one tag; data steps get
// distinct tags per (step, direction).
constexpr int kTagAccessList = 1 << 20;
constexpr int kTagDataBase = (1 << 20) + 16;

enum class Direction { read = 0, write = 1 };

int data_tag(std::int64_t step, Direction dir) {
  const std::int64_t span = kMaxUserTag - kTagDataBase;
  return kTagDataBase + static_cast<int>((2 * step + static_cast<int>(dir)) % span);
}

std::vector<std::byte> encode_segments(std::span<const Segment> segs) {
  std::vector<std::byte> out(segs.size() * 2 * sizeof(std::int64_t));
  std::byte* p = out.data();
  for (const Segment& s : segs) {
    std::memcpy(p, &s.offset, sizeof(std::int64_t));
    std::memcpy(p + sizeof(std::int64_t), &s.length, sizeof(std::int64_t));
    p += 2 * sizeof(std::int64_t);
  }
  return out;
}

std::vector<Segment> decode_segments(std::span<const std::byte> bytes) {
  constexpr std::size_t rec = 2 * sizeof(std::int64_t);
  if (bytes.size() % rec != 0) throw Error(Errc::protocol, "malformed access list");
  std::vector<Segment> out(bytes.size() / rec);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::memcpy(&out[i].offset, bytes.data() + i * rec, sizeof(std::int64_t));
    std::memcpy(&out[i].length, bytes.data() + i * rec + sizeof(std::int64_t), sizeof(std::int64_t));
  }
  return out;
}

// Hands out the parts of an ordered segment list that fall below a rising
// bound, one domain window at a time.
class WindowCursor {
 public:
  explicit WindowCursor(std::span<const Segment> segs) : segs_(segs) {}

  std::int64_t take_below(std::int64_t hi, std::vector<Segment>& out) {
    std::int64_t bytes = 0;
    while (idx_ < segs_.size() && segs_[idx_].offset + consumed_ < hi) {
      const std::int64_t start = segs_[idx_].offset + consumed_;
      const std::int64_t stop = std::min(segs_[idx_].end(), hi);
      out.push_back({start, stop - start});
      bytes += stop - start;
      if (stop == segs_[idx_].end()) {
        ++idx_;
        consumed_ = 0;
      } else {
        consumed_ = stop - segs_[idx_].offset;
      }
    }
    return bytes;
  }

 private:
  std::span<const Segment> segs_;
  std::size_t idx_ = 0;
  std::int64_t consumed_ = 0;
};

// Walks my pieces routed through one owner, mapping a stream of bytes
// exchanged with that owner onto positions in my data stream.
class StreamCursor {
 public:
  explicit StreamCursor(std::span<const Piece> pieces) : pieces_(pieces) {}

  /// Calls fn(stream_pos, length, payload_offset) for the next n bytes.
  template <class Fn>
  void advance(std::int64_t n, Fn&& fn) {
    std::int64_t at = 0;
    while (at < n) {
      if (idx_ >= pieces_.size()) throw Error(Errc::protocol, "peer exchanged more bytes than requested");
      const Piece& p = pieces_[idx_];
      const std::int64_t take = std::min(p.length - consumed_, n - at);
      fn(p.stream_pos + consumed_, take, at);
      at += take;
      consumed_ += take;
      if (consumed_ == p.length) {
        ++idx_;
        consumed_ = 0;
      }
    }
  }

 private:
  std::span<const Piece> pieces_;
  std::size_t idx_ = 0;
  std::int64_t consumed_ = 0;
};

// Everything both directions share up to the I/O loop.
struct Setup {
  bool collective = false;
  std::vector<FileDomain> domains;
  AccessPlan plan;
  bool owner = false;
  std::int64_t st_loc = 0;   // first byte anyone needs from my domain
  std::int64_t end_loc = 0;  // one past the last such byte
  std::int64_t ntimes = 0;
  std::int64_t max_ntimes = 0;
};

Setup prepare(Communicator& comm, std::span<const Segment> mine, const CollectiveConfig& cfg) {
  cfg.validate();
  Setup s;
  const std::vector<Extent> extents = exchange_extents(comm, extent_of(mine));
  if (!check_interleaved(extents)) return s;
  s.collective = true;

  std::int64_t min_start = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_end = -1;
  for (const Extent& e : extents) {
    if (e.empty()) continue;
    min_start = std::min(min_start, e.start);
    max_end = std::max(max_end, e.end);
  }
  const int nio = cfg.io_ranks(comm.size());
  s.domains = compute_file_domains(min_start, max_end, nio);
  s.plan = build_access_plan(comm, mine, s.domains);

  s.owner = comm.rank() < nio;
  if (s.owner) {
    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    std::int64_t last = -1;
    for (const auto& list : s.plan.incoming) {
      if (list.empty()) continue;
      first = std::min(first, list.front().offset);
      for (const Segment& seg : list) last = std::max(last, seg.end());
    }
    if (last > first) {
      s.st_loc = first;
      s.end_loc = last;
      s.ntimes = detail::ceil_div(last - first, cfg.cb_buffer_size);
    }
  }
  s.max_ntimes = comm.global_max(s.ntimes);
  return s;
}

struct StepWindow {
  std::vector<std::vector<Segment>> pieces;  // per requester, clipped to the window
  std::vector<std::int64_t> bytes;           // per requester
  std::int64_t first = 0;
  std::int64_t last = 0;  // exclusive
  bool any = false;
};

StepWindow clip_step(const Setup& s, std::vector<WindowCursor>& cursors, std::int64_t step,
                     std::int64_t cb, int nprocs) {
  StepWindow w;
  w.pieces.resize(static_cast<std::size_t>(nprocs));
  w.bytes.assign(static_cast<std::size_t>(nprocs), 0);
  if (step >= s.ntimes) return w;
  const std::int64_t hi = std::min(s.st_loc + (step + 1) * cb, s.end_loc);
  w.first = std::numeric_limits<std::int64_t>::max();
  w.last = -1;
  for (int r = 0; r < nprocs; ++r) {
    w.bytes[r] = cursors[r].take_below(hi, w.pieces[r]);
    if (w.pieces[r].empty()) continue;
    w.any = true;
    w.first = std::min(w.first, w.pieces[r].front().offset);
    for (const Segment& p : w.pieces[r]) w.last = std::max(w.last, p.end());
  }
  return w;
}

// True when the union of the step's pieces covers [first, last) exactly.
bool covers_without_holes(const StepWindow& w) {
  std::vector<Segment> all;
  for (const auto& list : w.pieces) all.insert(all.end(), list.begin(), list.end());
  std::sort(all.begin(), all.end(), [](const Segment& a, const Segment& b) { return a.offset < b.offset; });
  std::int64_t reach = w.first;
  for (const Segment& p : all) {
    if (p.offset > reach) return false;
    reach = std::max(reach, p.end());
  }
  return reach >= w.last;
}

void finish_stats(Communicator& comm, StorageFile& file, IoStats& tally, std::int64_t msgs0,
                  std::int64_t bytes0) {
  file.note_messages(comm.msgs_sent() - msgs0, comm.msg_bytes() - bytes0, &tally);
}

}  // namespace

void CollectiveConfig::validate() const {
  if (cb_buffer_size < 1) throw Error(Errc::invalid_argument, "cb_buffer_size must be >= 1");
  if (cb_nodes < 0) throw Error(Errc::invalid_argument, "cb_nodes must be >= 1");
}

int CollectiveConfig::io_ranks(int nprocs) const {
  return cb_nodes == 0 ? nprocs : std::min(cb_nodes, nprocs);
}

Extent extent_of(std::span<const Segment> segments) {
  Extent e;
  for (const Segment& s : segments) {
    if (s.length <= 0) continue;
    e.start = std::min(e.start, s.offset);
    e.end = std::max(e.end, s.end() - 1);
  }
  return e;
}

std::vector<Extent> exchange_extents(Communicator& comm, Extent mine) {
  return comm.allgather(mine);
}

bool check_interleaved(std::span<const Extent> extents) {
  const Extent* prev = nullptr;
  for (const Extent& e : extents) {
    if (e.empty()) continue;
    if (prev != nullptr && e.start < prev->end) return true;
    prev = &e;
  }
  return false;
}

std::vector<FileDomain> compute_file_domains(std::int64_t min_start, std::int64_t max_end, int io_ranks) {
  if (io_ranks < 1) throw Error(Errc::invalid_argument, "need at least one I/O rank");
  if (max_end < min_start) throw Error(Errc::invalid_argument, "empty access span");
  const std::int64_t span = max_end - min_start + 1;
  std::vector<FileDomain> domains;
  domains.reserve(static_cast<std::size_t>(io_ranks));
  for (int r = 0; r < io_ranks; ++r) {
    const Segment b = block_range(span, io_ranks, r);
    domains.push_back({r, min_start + b.offset, min_start + b.end()});
  }
  return domains;
}

std::vector<std::vector<Piece>> split_by_domain(std::span<const Segment> mine,
                                                std::span<const FileDomain> domains, int nprocs) {
  std::vector<std::vector<Piece>> out(static_cast<std::size_t>(nprocs));
  std::int64_t pos = 0;
  std::size_t d = 0;
  for (const Segment& seg : mine) {
    std::int64_t off = seg.offset;
    const std::int64_t end = seg.end();
    while (off < end) {
      while (d < domains.size() && domains[d].hi <= off) ++d;
      if (d == domains.size() || off < domains[d].lo) {
        throw Error(Errc::invalid_argument, "segment outside every file domain");
      }
      const std::int64_t stop = std::min(end, domains[d].hi);
      out[domains[d].owner].push_back({off, stop - off, pos});
      pos += stop - off;
      off = stop;
    }
  }
  return out;
}

AccessPlan build_access_plan(Communicator& comm, std::span<const Segment> mine,
                             std::span<const FileDomain> domains) {
  const int n = comm.size();
  const int me = comm.rank();
  AccessPlan plan;
  plan.outgoing = split_by_domain(mine, domains, n);
  plan.incoming.resize(static_cast<std::size_t>(n));

  std::vector<std::int64_t> counts(static_cast<std::size_t>(n));
  for (int o = 0; o < n; ++o) counts[o] = static_cast<std::int64_t>(plan.outgoing[o].size());
  const std::vector<std::int64_t> expected = comm.alltoall(counts);

  std::vector<Communicator::PendingRecv> pending;
  for (int r = 0; r < n; ++r) {
    if (r != me && expected[r] > 0) pending.push_back(comm.irecv(r, kTagAccessList));
  }
  for (int o = 0; o < n; ++o) {
    if (o == me || plan.outgoing[o].empty()) continue;
    std::vector<Segment> segs;
    segs.reserve(plan.outgoing[o].size());
    for (const Piece& p : plan.outgoing[o]) segs.push_back({p.offset, p.length});
    comm.send(o, kTagAccessList, encode_segments(segs));
  }
  for (const Piece& p : plan.outgoing[me]) plan.incoming[me].push_back({p.offset, p.length});
  for (auto& p : pending) {
    const int src = p.source();
    plan.incoming[src] = decode_segments(p.wait());
    if (static_cast<std::int64_t>(plan.incoming[src].size()) != expected[src]) {
      throw Error(Errc::protocol, "access list length mismatch");
    }
  }
  return plan;
}

CollectiveResult collective_read(Communicator& comm, StorageFile& file, std::span<const Segment> mine,
                                 const MutableBuffer& dest, const CollectiveConfig& cfg,
                                 const SieveConfig& independent) {
  if (total_length(mine) != dest.size()) throw Error(Errc::invalid_argument, "request and buffer sizes differ");
  const std::int64_t msgs0 = comm.msgs_sent();
  const std::int64_t bytes0 = comm.msg_bytes();
  CollectiveResult result;
  Setup s = prepare(comm, mine, cfg);
  if (!s.collective) {
    result.stats = sieve_read(file, mine, dest, independent);
    finish_stats(comm, file, result.stats, msgs0, bytes0);
    return result;
  }
  result.collective = true;
  result.ntimes = s.ntimes;
  result.max_ntimes = s.max_ntimes;

  const int n = comm.size();
  const int me = comm.rank();
  IoStats& tally = result.stats;
  std::vector<WindowCursor> owed;
  std::vector<StreamCursor> arriving;
  for (int r = 0; r < n; ++r) {
    owed.emplace_back(s.plan.incoming[r]);
    arriving.emplace_back(s.plan.outgoing[r]);
  }
  std::vector<std::byte> staging(static_cast<std::size_t>(std::min(cfg.cb_buffer_size, s.end_loc - s.st_loc)));

  auto deliver = [&](int owner, std::span<const std::byte> bytes) {
    arriving[owner].advance(static_cast<std::int64_t>(bytes.size()),
                            [&](std::int64_t pos, std::int64_t len, std::int64_t at) {
                              dest.scatter(pos, bytes.subspan(static_cast<std::size_t>(at), static_cast<std::size_t>(len)));
                            });
  };

  for (std::int64_t step = 0; step < s.max_ntimes; ++step) {
    const int tag = data_tag(step, Direction::read);
    StepWindow w = clip_step(s, owed, step, cfg.cb_buffer_size, n);
    const std::vector<std::int64_t> recv_bytes = comm.alltoall(w.bytes);

    std::vector<Communicator::PendingRecv> pending;
    for (int o = 0; o < n; ++o) {
      if (o != me && recv_bytes[o] > 0) pending.push_back(comm.irecv(o, tag));
    }

    if (w.any) {
      const std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(w.last - w.first));
      const ReadResult rr = file.read_contig(w.first, buf, &tally);
      if (w.first + rr.nread < w.last) {
        throw Error(Errc::beyond_eof, "collective read needs bytes up to " + std::to_string(w.last) +
                                          " but the file ends at " + std::to_string(w.first + rr.nread));
      }
      for (int r = 0; r < n; ++r) {
        if (w.pieces[r].empty()) continue;
        if (r == me) {
          for (const Segment& p : w.pieces[r]) {
            deliver(me, buf.subspan(static_cast<std::size_t>(p.offset - w.first), static_cast<std::size_t>(p.length)));
          }
          continue;
        }
        std::vector<std::byte> payload;
        payload.reserve(static_cast<std::size_t>(w.bytes[r]));
        for (const Segment& p : w.pieces[r]) {
          const auto from = buf.begin() + (p.offset - w.first);
          payload.insert(payload.end(), from, from + p.length);
        }
        comm.send(r, tag, std::move(payload));
      }
    }

    for (auto& p : pending) {
      const int src = p.source();
      const std::vector<std::byte> data = p.wait();
      if (static_cast<std::int64_t>(data.size()) != recv_bytes[src]) {
        throw Error(Errc::protocol, "data message size differs from announced size");
      }
      deliver(src, data);
    }
    ++result.comm_steps;
  }

  file.note_useful(dest.size(), 0, &tally);
  finish_stats(comm, file, tally, msgs0, bytes0);
  return result;
}

CollectiveResult collective_write(Communicator& comm, StorageFile& file, std::span<const Segment> mine,
                                  const ConstBuffer& src, const CollectiveConfig& cfg,
                                  const SieveConfig& independent) {
  if (total_length(mine) != src.size()) throw Error(Errc::invalid_argument, "request and buffer sizes differ");
  const std::int64_t msgs0 = comm.msgs_sent();
  const std::int64_t bytes0 = comm.msg_bytes();
  CollectiveResult result;
  Setup s = prepare(comm, mine, cfg);
  if (!s.collective) {
    result.stats = write_noncontig(file, mine, src, independent);
    finish_stats(comm, file, result.stats, msgs0, bytes0);
    return result;
  }
  result.collective = true;
  result.ntimes = s.ntimes;
  result.max_ntimes = s.max_ntimes;

  const int n = comm.size();
  const int me = comm.rank();
  IoStats& tally = result.stats;
  std::vector<WindowCursor> owed;
  std::vector<StreamCursor> leaving;
  for (int r = 0; r < n; ++r) {
    owed.emplace_back(s.plan.incoming[r]);
    leaving.emplace_back(s.plan.outgoing[r]);
  }
  std::vector<std::byte> staging(static_cast<std::size_t>(std::min(cfg.cb_buffer_size, s.end_loc - s.st_loc)));

  auto collect = [&](int owner, std::int64_t nbytes) {
    std::vector<std::byte> payload(static_cast<std::size_t>(nbytes));
    leaving[owner].advance(nbytes, [&](std::int64_t pos, std::int64_t len, std::int64_t at) {
      src.gather(pos, std::span(payload).subspan(static_cast<std::size_t>(at), static_cast<std::size_t>(len)));
    });
    return payload;
  };

  for (std::int64_t step = 0; step < s.max_ntimes; ++step) {
    const int tag = data_tag(step, Direction::write);
    StepWindow w = clip_step(s, owed, step, cfg.cb_buffer_size, n);
    // w.bytes is what I expect from each requester; the transpose is what
    // each owner expects from me.
    const std::vector<std::int64_t> send_bytes = comm.alltoall(w.bytes);

    std::vector<Communicator::PendingRecv> pending;
    for (int r = 0; r < n; ++r) {
      if (r != me && w.bytes[r] > 0) pending.push_back(comm.irecv(r, tag));
    }
    for (int o = 0; o < n; ++o) {
      if (o != me && send_bytes[o] > 0) comm.send(o, tag, collect(o, send_bytes[o]));
    }

    std::vector<std::vector<std::byte>> incoming(static_cast<std::size_t>(n));
    if (w.bytes[me] > 0) incoming[me] = collect(me, w.bytes[me]);
    for (auto& p : pending) {
      const int r = p.source();
      incoming[r] = p.wait();
      if (static_cast<std::int64_t>(incoming[r].size()) != w.bytes[r]) {
        throw Error(Errc::protocol, "data message size differs from announced size");
      }
    }

    if (w.any) {
      const std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(w.last - w.first));
      if (!covers_without_holes(w)) {
        const ReadResult rr = file.read_contig(w.first, buf, &tally);
        std::fill(buf.begin() + rr.nread, buf.end(), std::byte{0});
      }
      for (int r = 0; r < n; ++r) {
        std::int64_t at = 0;
        for (const Segment& p : w.pieces[r]) {
          std::memcpy(buf.data() + (p.offset - w.first), incoming[r].data() + at, static_cast<std::size_t>(p.length));
          at += p.length;
        }
      }
      file.write_contig(w.first, buf, &tally);
    }
    ++result.comm_steps;
  }

  file.note_useful(0, src.size(), &tally);
  finish_stats(comm, file, tally, msgs0, bytes0);
  return result;
}

}  // namespace ncio
