#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ncio/backend.hpp"
#include "ncio/buffer.hpp"
#include "ncio/layout.hpp"

namespace ncio {

struct SieveConfig {
  std::int64_t ind_rd_buffer_size = 4 * 1024 * 1024;
  std::int64_t ind_wr_buffer_size = 512 * 1024;
  /// When set, a window whose hole bytes exceed this multiple of its useful
  /// bytes is served one segment at a time instead of sieved.
  std::optional<double> hole_threshold;

  void validate() const;
};

/// One contiguous file access of a sieved request.
struct Window {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::vector<Segment> pieces;  // requested bytes inside [lo, hi), in order
  std::int64_t stream_pos = 0;  // stream position of the first piece

  std::int64_t useful() const;
  bool has_holes() const { return useful() < hi - lo; }
};

/// Splits a canonical segment list into windows of at most `limit` bytes.
/// Each window starts at the first requested byte not yet covered and ends
/// just past the last requested byte that fits.
std::vector<Window> plan_windows(std::span<const Segment> segments, std::int64_t limit);

/// Sieved read of `segments` into `dest`. One read call per window.
IoStats sieve_read(StorageFile& file, std::span<const Segment> segments, const MutableBuffer& dest,
                   const SieveConfig& cfg);

/// Sieved write with per-window lock + read-modify-write. Windows without
/// holes skip the read. Throws Error(fallback_required) if the file cannot
/// lock; the caller is expected to use write_each instead.
IoStats sieve_write(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src,
                    const SieveConfig& cfg);

/// Unoptimized access: one contiguous call per segment.
IoStats read_each(StorageFile& file, std::span<const Segment> segments, const MutableBuffer& dest);
IoStats write_each(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src);

/// sieve_write, or write_each when the file has no locks.
IoStats write_noncontig(StorageFile& file, std::span<const Segment> segments, const ConstBuffer& src,
                        const SieveConfig& cfg);

std::int64_t total_length(std::span<const Segment> segments);

}  // namespace ncio
