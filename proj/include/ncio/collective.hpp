#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ncio/backend.hpp"
#include "ncio/buffer.hpp"
#include "ncio/fabric.hpp"
#include "ncio/layout.hpp"
#include "ncio/sieve.hpp"

namespace ncio {

struct CollectiveConfig {
  std::int64_t cb_buffer_size = 4 * 1024 * 1024;
  /// Number of ranks doing file I/O, taken from the lowest ranks. 0 = all.
  int cb_nodes = 0;

  void validate() const;
  int io_ranks(int nprocs) const;
};

/// First and last byte (inclusive) a rank touches. start > end marks a rank
/// with nothing to access.
struct Extent {
  std::int64_t start = std::numeric_limits<std::int64_t>::max();
  std::int64_t end = -1;

  bool empty() const { return start > end; }
  friend bool operator==(const Extent&, const Extent&) = default;
};

Extent extent_of(std::span<const Segment> segments);

/// Every rank's extent, indexed by rank, identical on all ranks.
std::vector<Extent> exchange_extents(Communicator& comm, Extent mine);

/// True when some pair of consecutive non-empty ranks i, i+1 has
/// start[i+1] < end[i].
bool check_interleaved(std::span<const Extent> extents);

struct FileDomain {
  int owner = 0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;  // exclusive

  std::int64_t size() const { return hi - lo; }
  friend bool operator==(const FileDomain&, const FileDomain&) = default;
};

/// Splits [min_start, max_end] (inclusive) into `io_ranks` contiguous
/// domains owned by ranks 0..io_ranks-1. The first (span mod io_ranks)
/// domains get one extra byte.
std::vector<FileDomain> compute_file_domains(std::int64_t min_start, std::int64_t max_end, int io_ranks);

/// A piece of this rank's request routed through some domain owner.
struct Piece {
  std::int64_t offset = 0;
  std::int64_t length = 0;
  std::int64_t stream_pos = 0;  // where the bytes sit in this rank's data stream

  friend bool operator==(const Piece&, const Piece&) = default;
};

struct AccessPlan {
  /// outgoing[o]: my bytes living in rank o's domain, in file order. The
  /// entry for my own rank is the self list.
  std::vector<std::vector<Piece>> outgoing;
  /// incoming[r]: what rank r needs from my domain, in file order. Empty
  /// for ranks that own no domain.
  std::vector<std::vector<Segment>> incoming;
};

/// Local half of the plan: splits my segments at domain boundaries.
std::vector<std::vector<Piece>> split_by_domain(std::span<const Segment> mine,
                                                std::span<const FileDomain> domains, int nprocs);

/// Splits locally, then exchanges request lists so each owner learns its
/// incoming lists.
AccessPlan build_access_plan(Communicator& comm, std::span<const Segment> mine,
                             std::span<const FileDomain> domains);

struct CollectiveResult {
  IoStats stats;
  bool collective = false;     // false when routed to independent I/O
  std::int64_t ntimes = 0;     // I/O steps over my domain
  std::int64_t max_ntimes = 0;
  std::int64_t comm_steps = 0; // communication steps actually executed
};

/// Two-phase read. `mine` must be canonical (sorted, merged) absolute file
/// segments; dest receives them in order. Called by every rank of `comm`.
CollectiveResult collective_read(Communicator& comm, StorageFile& file, std::span<const Segment> mine,
                                 const MutableBuffer& dest, const CollectiveConfig& cfg,
                                 const SieveConfig& independent = {});

/// Two-phase write: exchange first, then per-domain write (read-modify-write
/// when the step has holes). Takes no range locks.
CollectiveResult collective_write(Communicator& comm, StorageFile& file, std::span<const Segment> mine,
                                  const ConstBuffer& src, const CollectiveConfig& cfg,
                                  const SieveConfig& independent = {});

}  // namespace ncio
