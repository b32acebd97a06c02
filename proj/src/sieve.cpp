#include "ncio/sieve.hpp"

#include <algorithm>
#include <string>

#include "ncio/error.hpp"

namespace ncio {

void SieveConfig::validate() const {
  if (ind_rd_buffer_size < 1 || ind_wr_buffer_size < 1) {
    throw Error(Errc::invalid_argument, "sieve buffer sizes must be >= 1");
  }
  if (hole_threshold && *hole_threshold < 0) {
    throw Error(Errc::invalid_argument, "hole threshold must be non-negative");
  }
}

std::int64_t Window::useful() const { return total_length(pieces); }

std::int64_t total_length(std::span<const Segment> segments) {
  std::int64_t n = 0;
  for (const Segment& s : segments) n += s.length;
  return n;
}

std::vector<Window> plan_windows(std::span<const Segment> segments, std::int64_t limit) {
  if (limit < 1) throw Error(Errc::invalid_argument, "window limit must be >= 1");
  std::vector<Window> windows;
  std::size_t i = 0;
  std::int64_t within = 0;  // bytes of segments[i] already consumed
  std::int64_t pos = 0;
  while (i < segments.size()) {
    Window w;
    w.lo = w.hi = segments[i].offset + within;
    w.stream_pos = pos;
    const std::int64_t cap = w.lo + limit;
    while (i < segments.size() && segments[i].offset + within < cap) {
      const std::int64_t start = segments[i].offset + within;
      const std::int64_t stop = std::min(segments[i].end(), cap);
      w.pieces.push_back({start, stop - start});
      w.hi = stop;
      pos += stop - start;
      if (stop == segments[i].end()) {
        ++i;
        within = 0;
      } else {
        within = stop - segments[i].offset;
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {

void check_sizes(std::span<const Segment> segments, std::int64_t buffer_bytes) {
  if (total_length(segments) != buffer_bytes) {
    throw Error(Errc::invalid_argument, "request bytes (" + std::to_string(total_length(segments)) +
                                            ") differ from buffer bytes (" + std::to_string(buffer_bytes) + ")");
  }
}

bool serve_piecewise(const Window& w, const SieveConfig& cfg) {
  if (!cfg.hole_threshold || w.pieces.size() < 2) return false;
  const auto useful = static_cast<double>(w.useful());
  const auto holes = static_cast<double>(w.hi - w.lo) - useful;
  return holes > *cfg.hole_threshold * useful;
}

std::size_t staging_size(std::span<const Segment> segments, std::int64_t limit) {
  if (segments.empty()) return 0;
  const std::int64_t extent = segments.back().end() - segments.front().offset;
  return static_cast<std::size_t>(std::min(limit, extent));
}

void require_present(const Segment& piece, std::int64_t available_end) {
  if (piece.end() > available_end) {
    throw Error(Errc::beyond_eof, "requested bytes [" + std::to_string(piece.offset) + ", " +
                                      std::to_string(piece.end()) + ") extend past end of file");
  }
}

}  // namespace

IoStats sieve_read(StorageFile& file, std::span<const Segment> segments, const MutableBuffer& dest,
                   const SieveConfig& cfg) {
  cfg.validate();
  check_sizes(segments, dest.size());
  IoStats tally;
  const std::vector<Window> windows = plan_windows(segments, cfg.ind_rd_buffer_size);
  std::vector<std::byte> staging(staging_size(segments, cfg.ind_rd_buffer_size));

  for (const Window& w : windows) {
    std::int64_t pos = w.stream_pos;
    if (serve_piecewise(w, cfg)) {
      for (const Segment& p : w.pieces) {
        std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(p.length));
        const ReadResult r = file.read_contig(p.offset, buf, &tally);
        require_present(p, p.offset + r.nread);
        dest.scatter(pos, buf);
        pos += p.length;
      }
      continue;
    }
    std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(w.hi - w.lo));
    const ReadResult r = file.read_contig(w.lo, buf, &tally);
    for (const Segment& p : w.pieces) {
      require_present(p, w.lo + r.nread);
      dest.scatter(pos, buf.subspan(static_cast<std::size_t>(p.offset - w.lo), static_cast<std::size_t>(p.length)));
      pos += p.length;
    }
  }
  file.note_useful(dest.size(), 0, &tally);
  return tally;
}

IoStats sieve_write(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src,
                    const SieveConfig& cfg) {
  cfg.validate();
  check_sizes(segments, src.size());
  if (!file.supports_locking()) {
    throw Error(Errc::fallback_required, "sieved writes need byte-range locks");
  }
  IoStats tally;
  const std::vector<Window> windows = plan_windows(segments, cfg.ind_wr_buffer_size);
  std::vector<std::byte> staging(staging_size(segments, cfg.ind_wr_buffer_size));

  for (const Window& w : windows) {
    std::int64_t pos = w.stream_pos;
    if (serve_piecewise(w, cfg)) {
      for (const Segment& p : w.pieces) {
        std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(p.length));
        src.gather(pos, buf);
        file.write_contig(p.offset, buf, &tally);
        pos += p.length;
      }
      continue;
    }
    const std::span<std::byte> buf(staging.data(), static_cast<std::size_t>(w.hi - w.lo));
    // Held even for hole-free windows: an unlocked write could land inside
    // another rank's read-modify-write span and be overwritten by stale data.
    RangeLock lock = file.lock_range(w.lo, w.hi - w.lo, &tally);
    if (w.has_holes()) {
      const ReadResult r = file.read_contig(w.lo, buf, &tally);
      std::fill(buf.begin() + r.nread, buf.end(), std::byte{0});
    }
    for (const Segment& p : w.pieces) {
      src.gather(pos, buf.subspan(static_cast<std::size_t>(p.offset - w.lo), static_cast<std::size_t>(p.length)));
      pos += p.length;
    }
    file.write_contig(w.lo, buf, &tally);
  }
  file.note_useful(0, src.size(), &tally);
  return tally;
}

IoStats read_each(StorageFile& file, std::span<const Segment> segments, const MutableBuffer& dest) {
  check_sizes(segments, dest.size());
  IoStats tally;
  std::vector<std::byte> staging;
  std::int64_t pos = 0;
  for (const Segment& s : segments) {
    if (dest.contiguous()) {
      const std::int64_t origin = dest.layout().segments.front().offset + pos;
      const auto buf = dest.buffer().subspan(static_cast<std::size_t>(origin), static_cast<std::size_t>(s.length));
      const ReadResult r = file.read_contig(s.offset, buf, &tally);
      require_present(s, s.offset + r.nread);
    } else {
      staging.resize(static_cast<std::size_t>(s.length));
      const ReadResult r = file.read_contig(s.offset, staging, &tally);
      require_present(s, s.offset + r.nread);
      dest.scatter(pos, staging);
    }
    pos += s.length;
  }
  file.note_useful(dest.size(), 0, &tally);
  return tally;
}

IoStats write_each(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src) {
  check_sizes(segments, src.size());
  IoStats tally;
  std::vector<std::byte> staging;
  std::int64_t pos = 0;
  for (const Segment& s : segments) {
    staging.resize(static_cast<std::size_t>(s.length));
    src.gather(pos, staging);
    file.write_contig(s.offset, staging, &tally);
    pos += s.length;
  }
  file.note_useful(0, src.size(), &tally);
  return tally;
}

IoStats write_noncontig(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src,
                        const SieveConfig& cfg) {
  if (!file.supports_locking()) return write_each(file, segments, src);
  return sieve_write(file, segments, src, cfg);
}

}  // namespace ncio
