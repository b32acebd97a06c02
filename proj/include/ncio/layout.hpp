#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace ncio {

/// A run of bytes at `offset`. Offsets are relative to whatever origin the
/// owner defines (datatype origin, file start, or buffer start).
struct Segment {
  std::int64_t offset = 0;
  std::int64_t length = 0;

  std::int64_t end() const { return offset + length; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Canonical flattened layout: segments sorted by offset, non-overlapping,
/// and maximally merged (no two consecutive segments touch).
struct FlatRepr {
  std::vector<Segment> segments;
  std::int64_t size = 0;
  std::int64_t extent = 0;

  bool contiguous() const { return segments.size() <= 1 && size == extent; }
  friend bool operator==(const FlatRepr&, const FlatRepr&) = default;
};

/// Sorts, rejects overlaps, and merges touching segments. Zero-length
/// segments are dropped. Throws Error(invalid_argument) on overlap.
std::vector<Segment> normalize_segments(std::vector<Segment> segs);

/// Appends `seg` to an already canonical list, merging with the tail when the
/// two touch. `seg` must not start before the tail ends.
void append_merged(std::vector<Segment>& out, Segment seg);

/// Writes one `offset length` line per segment.
void dump(std::ostream& os, const FlatRepr& flat);

enum class Order { row_major, column_major };

enum class TypeKind { basic, contiguous, vector, indexed, heterogeneous, subarray, darray_block };

class Datatype;

/// Constructor parameters as supplied by the caller. All byte quantities are
/// already scaled to bytes.
struct TypeNode {
  TypeKind kind = TypeKind::basic;
  std::int64_t width = 0;  // basic

  std::int64_t count = 0;         // contiguous, vector
  std::int64_t blocklen = 0;      // vector
  std::int64_t stride_bytes = 0;  // vector

  std::vector<std::int64_t> blocklens;    // indexed, heterogeneous
  std::vector<std::int64_t> displs_bytes; // indexed, heterogeneous

  std::vector<std::int64_t> sizes;     // subarray, darray_block (global sizes)
  std::vector<std::int64_t> subsizes;  // subarray; darray_block: this rank's block
  std::vector<std::int64_t> starts;    // subarray; darray_block: this rank's block
  std::vector<std::int64_t> grid;      // darray_block
  int rank = 0;                        // darray_block
  Order order = Order::row_major;

  std::vector<Datatype> children;  // one child except heterogeneous

  std::int64_t size = 0;
  std::int64_t extent = 0;
  FlatRepr flat;
};

/// Immutable, cheaply copyable handle to a layout tree. The flattened form is
/// computed once at construction.
class Datatype {
 public:
  /// One-byte basic type.
  Datatype();

  TypeKind kind() const { return node_->kind; }
  std::int64_t size() const { return node_->size; }
  std::int64_t extent() const { return node_->extent; }
  const FlatRepr& flat() const { return node_->flat; }
  const TypeNode& node() const { return *node_; }

 private:
  explicit Datatype(std::shared_ptr<const TypeNode> node) : node_(std::move(node)) {}
  friend Datatype make_node(TypeNode node);

  std::shared_ptr<const TypeNode> node_;
};

Datatype byte_type();
Datatype make_basic(std::int64_t width);

Datatype make_contiguous(std::int64_t count, const Datatype& base);

/// `stride` counts base extents unless `stride_in_bytes` (hvector).
Datatype make_vector(std::int64_t count, std::int64_t blocklen, std::int64_t stride,
                     const Datatype& base, bool stride_in_bytes = false);

/// `displs` count base extents unless `displs_in_bytes` (hindexed).
Datatype make_indexed(std::span<const std::int64_t> blocklens,
                      std::span<const std::int64_t> displs, const Datatype& base,
                      bool displs_in_bytes = false);

Datatype make_heterogeneous(std::span<const std::int64_t> blocklens,
                            std::span<const std::int64_t> byte_displs,
                            std::span<const Datatype> bases);

Datatype make_subarray(std::span<const std::int64_t> sizes,
                       std::span<const std::int64_t> subsizes,
                       std::span<const std::int64_t> starts, Order order,
                       const Datatype& base);

/// Block bounds of `block` out of `nblocks` along a dimension of length `n`.
/// The first n mod nblocks blocks get one extra element.
Segment block_range(std::int64_t n, std::int64_t nblocks, std::int64_t block);

/// The local block of `rank` in a (block, block, ...) distribution over
/// `proc_grid`. Ranks are laid out over the grid in `order`.
Datatype make_darray_block(std::span<const std::int64_t> global_sizes,
                           std::span<const std::int64_t> proc_grid, int rank,
                           const Datatype& base, Order order = Order::row_major);

inline const FlatRepr& flatten(const Datatype& dt) { return dt.flat(); }

/// (displacement, filetype) pair. The filetype tiles end to end from the
/// displacement; only its bytes are visible.
struct FileView {
  std::int64_t displacement = 0;
  Datatype filetype;
};

/// Absolute file segments holding `nbytes` visible bytes starting at visible
/// byte `visible_start`, merged.
std::vector<Segment> view_map(const FileView& view, std::int64_t visible_start,
                              std::int64_t nbytes);

}  // namespace ncio
