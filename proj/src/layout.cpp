#include "ncio/layout.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "checked.hpp"
#include "ncio/error.hpp"

namespace ncio {

using detail::checked_add;
using detail::checked_mul;

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::overflow: return "overflow";
    case Errc::io_error: return "I/O error";
    case Errc::unsupported: return "unsupported";
    case Errc::fallback_required: return "fallback required";
    case Errc::beyond_eof: return "request beyond EOF";
    case Errc::protocol: return "protocol error";
    case Errc::timeout: return "timeout";
    case Errc::aborted: return "aborted";
  }
  return "unknown";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::invalid_argument, what); }

// Emits `copies` back-to-back instances of `child` starting at `origin`.
void replicate(const Datatype& child, std::int64_t origin, std::int64_t copies,
               std::vector<Segment>& out) {
  if (copies <= 0 || child.size() == 0) return;
  const FlatRepr& flat = child.flat();
  if (flat.contiguous()) {
    out.push_back({origin, checked_mul(copies, child.extent())});
    return;
  }
  for (std::int64_t c = 0; c < copies; ++c) {
    const std::int64_t base = checked_add(origin, checked_mul(c, child.extent()));
    for (const Segment& s : flat.segments) out.push_back({base + s.offset, s.length});
  }
}

FlatRepr finish_flat(std::vector<Segment> segs, std::int64_t size, std::int64_t extent) {
  FlatRepr flat;
  flat.segments = normalize_segments(std::move(segs));
  flat.size = size;
  flat.extent = extent;
  return flat;
}

std::int64_t product(std::span<const std::int64_t> v) {
  std::int64_t p = 1;
  for (std::int64_t x : v) p = checked_mul(p, x);
  return p;
}

}  // namespace

std::vector<Segment> normalize_segments(std::vector<Segment> segs) {
  std::erase_if(segs, [](const Segment& s) { return s.length == 0; });
  if (!std::is_sorted(segs.begin(), segs.end(),
                      [](const Segment& a, const Segment& b) { return a.offset < b.offset; })) {
    std::sort(segs.begin(), segs.end(),
              [](const Segment& a, const Segment& b) { return a.offset < b.offset; });
  }
  std::vector<Segment> out;
  out.reserve(segs.size());
  for (const Segment& s : segs) {
    if (s.length < 0 || s.offset < 0) invalid("negative segment offset or length");
    if (!out.empty() && s.offset < out.back().end()) invalid("overlapping segments");
    append_merged(out, s);
  }
  return out;
}

void append_merged(std::vector<Segment>& out, Segment seg) {
  if (seg.length == 0) return;
  if (!out.empty() && out.back().end() == seg.offset) {
    out.back().length += seg.length;
  } else {
    out.push_back(seg);
  }
}

void dump(std::ostream& os, const FlatRepr& flat) {
  for (const Segment& s : flat.segments) os << s.offset << ' ' << s.length << '\n';
}

Datatype make_node(TypeNode node) {
  return Datatype(std::make_shared<const TypeNode>(std::move(node)));
}

Datatype::Datatype() : Datatype(byte_type()) {}

Datatype byte_type() {
  static const Datatype byte = make_basic(1);
  return byte;
}

Datatype make_basic(std::int64_t width) {
  if (width < 1) invalid("basic type width must be >= 1");
  TypeNode n;
  n.kind = TypeKind::basic;
  n.width = width;
  n.size = n.extent = width;
  n.flat = FlatRepr{{{0, width}}, width, width};
  return make_node(std::move(n));
}

Datatype make_contiguous(std::int64_t count, const Datatype& base) {
  if (count < 1) invalid("contiguous count must be >= 1");
  TypeNode n;
  n.kind = TypeKind::contiguous;
  n.count = count;
  n.children = {base};
  n.size = checked_mul(count, base.size());
  n.extent = checked_mul(count, base.extent());
  std::vector<Segment> segs;
  replicate(base, 0, count, segs);
  n.flat = finish_flat(std::move(segs), n.size, n.extent);
  return make_node(std::move(n));
}

Datatype make_vector(std::int64_t count, std::int64_t blocklen, std::int64_t stride,
                     const Datatype& base, bool stride_in_bytes) {
  if (count < 1 || blocklen < 1) invalid("vector count and blocklen must be >= 1");
  if (stride < 0) invalid("vector stride must be non-negative");
  TypeNode n;
  n.kind = TypeKind::vector;
  n.count = count;
  n.blocklen = blocklen;
  n.stride_bytes = stride_in_bytes ? stride : checked_mul(stride, base.extent());
  n.children = {base};
  n.size = checked_mul(checked_mul(count, blocklen), base.size());
  n.extent = checked_add(checked_mul(count - 1, n.stride_bytes), checked_mul(blocklen, base.extent()));
  std::vector<Segment> segs;
  for (std::int64_t b = 0; b < count; ++b) replicate(base, b * n.stride_bytes, blocklen, segs);
  n.flat = finish_flat(std::move(segs), n.size, n.extent);
  return make_node(std::move(n));
}

namespace {

Datatype build_blocks(TypeKind kind, std::span<const std::int64_t> blocklens,
                      std::vector<std::int64_t> byte_displs, std::vector<Datatype> bases) {
  TypeNode n;
  n.kind = kind;
  n.blocklens.assign(blocklens.begin(), blocklens.end());
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < blocklens.size(); ++i) {
    const Datatype& base = kind == TypeKind::heterogeneous ? bases[i] : bases.front();
    if (blocklens[i] < 1) invalid("block lengths must be >= 1");
    if (byte_displs[i] < 0) invalid("block displacements must be non-negative");
    n.size = checked_add(n.size, checked_mul(blocklens[i], base.size()));
    n.extent = std::max(n.extent,
                        checked_add(byte_displs[i], checked_mul(blocklens[i], base.extent())));
    replicate(base, byte_displs[i], blocklens[i], segs);
  }
  n.displs_bytes = std::move(byte_displs);
  n.children = std::move(bases);
  n.flat = finish_flat(std::move(segs), n.size, n.extent);
  return make_node(std::move(n));
}

}  // namespace

Datatype make_indexed(std::span<const std::int64_t> blocklens, std::span<const std::int64_t> displs,
                      const Datatype& base, bool displs_in_bytes) {
  if (blocklens.size() != displs.size()) invalid("indexed: blocklens and displs differ in length");
  std::vector<std::int64_t> bytes(displs.begin(), displs.end());
  if (!displs_in_bytes) {
    for (auto& d : bytes) d = checked_mul(d, base.extent());
  }
  return build_blocks(TypeKind::indexed, blocklens, std::move(bytes), {base});
}

Datatype make_heterogeneous(std::span<const std::int64_t> blocklens,
                            std::span<const std::int64_t> byte_displs,
                            std::span<const Datatype> bases) {
  if (blocklens.size() != byte_displs.size() || blocklens.size() != bases.size()) {
    invalid("heterogeneous: list lengths differ");
  }
  return build_blocks(TypeKind::heterogeneous, blocklens,
                      std::vector<std::int64_t>(byte_displs.begin(), byte_displs.end()),
                      std::vector<Datatype>(bases.begin(), bases.end()));
}

namespace {

// Subarray bytes for validated bounds. Dimensions are visited slowest first,
// so the innermost run is contiguous in the array.
FlatRepr subarray_flat(std::span<const std::int64_t> sizes, std::span<const std::int64_t> subsizes,
                       std::span<const std::int64_t> starts, Order order, const Datatype& base,
                       std::int64_t size, std::int64_t extent) {
  const std::size_t nd = sizes.size();
  std::vector<std::int64_t> sz(sizes.begin(), sizes.end());
  std::vector<std::int64_t> sub(subsizes.begin(), subsizes.end());
  std::vector<std::int64_t> st(starts.begin(), starts.end());
  if (order == Order::column_major) {
    std::reverse(sz.begin(), sz.end());
    std::reverse(sub.begin(), sub.end());
    std::reverse(st.begin(), st.end());
  }
  std::vector<std::int64_t> stride(nd, 1);
  for (std::size_t d = nd - 1; d > 0; --d) stride[d - 1] = checked_mul(stride[d], sz[d]);

  std::vector<Segment> segs;
  std::vector<std::int64_t> idx(nd, 0);
  const std::size_t fast = nd - 1;
  for (bool done = false; !done;) {
    std::int64_t elem = st[fast];
    for (std::size_t d = 0; d < fast; ++d) elem += (st[d] + idx[d]) * stride[d];
    replicate(base, checked_mul(elem, base.extent()), sub[fast], segs);
    // odometer over the slow dimensions
    done = true;
    for (std::size_t d = fast; d-- > 0;) {
      if (++idx[d] < sub[d]) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
  }
  return finish_flat(std::move(segs), size, extent);
}

void check_subarray(std::span<const std::int64_t> sizes, std::span<const std::int64_t> subsizes,
                    std::span<const std::int64_t> starts) {
  if (sizes.empty()) invalid("subarray needs at least one dimension");
  if (sizes.size() != subsizes.size() || sizes.size() != starts.size()) {
    invalid("subarray: dimension lists differ in length");
  }
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    if (sizes[d] < 1 || subsizes[d] < 1) invalid("subarray sizes must be >= 1");
    if (starts[d] < 0 || starts[d] + subsizes[d] > sizes[d]) invalid("subarray bounds violation");
  }
}

}  // namespace

Datatype make_subarray(std::span<const std::int64_t> sizes, std::span<const std::int64_t> subsizes,
                       std::span<const std::int64_t> starts, Order order, const Datatype& base) {
  check_subarray(sizes, subsizes, starts);
  TypeNode n;
  n.kind = TypeKind::subarray;
  n.sizes.assign(sizes.begin(), sizes.end());
  n.subsizes.assign(subsizes.begin(), subsizes.end());
  n.starts.assign(starts.begin(), starts.end());
  n.order = order;
  n.children = {base};
  n.size = checked_mul(product(subsizes), base.size());
  n.extent = checked_mul(product(sizes), base.extent());
  n.flat = subarray_flat(sizes, subsizes, starts, order, base, n.size, n.extent);
  return make_node(std::move(n));
}

Segment block_range(std::int64_t n, std::int64_t nblocks, std::int64_t block) {
  const std::int64_t q = n / nblocks;
  const std::int64_t r = n % nblocks;
  const std::int64_t start = block * q + std::min(block, r);
  return {start, q + (block < r ? 1 : 0)};
}

Datatype make_darray_block(std::span<const std::int64_t> global_sizes,
                           std::span<const std::int64_t> proc_grid, int rank, const Datatype& base,
                           Order order) {
  if (global_sizes.empty() || global_sizes.size() != proc_grid.size()) {
    invalid("darray: global sizes and process grid differ in rank");
  }
  for (std::int64_t p : proc_grid) {
    if (p < 1) invalid("darray: process grid entries must be >= 1");
  }
  const std::int64_t nprocs = product(proc_grid);
  if (rank < 0 || rank >= nprocs) invalid("darray: rank out of range");

  const std::size_t nd = global_sizes.size();
  std::vector<std::int64_t> coords(nd);
  std::int64_t rest = rank;
  for (std::size_t d = nd; d-- > 0;) {
    coords[d] = rest % proc_grid[d];
    rest /= proc_grid[d];
  }
  std::vector<std::int64_t> subsizes(nd), starts(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    if (global_sizes[d] < proc_grid[d]) invalid("darray: more processes than elements along a dimension");
    const Segment b = block_range(global_sizes[d], proc_grid[d], coords[d]);
    starts[d] = b.offset;
    subsizes[d] = b.length;
  }
  check_subarray(global_sizes, subsizes, starts);

  TypeNode n;
  n.kind = TypeKind::darray_block;
  n.sizes.assign(global_sizes.begin(), global_sizes.end());
  n.grid.assign(proc_grid.begin(), proc_grid.end());
  n.rank = rank;
  n.order = order;
  n.subsizes = subsizes;
  n.starts = starts;
  n.children = {base};
  n.size = checked_mul(product(subsizes), base.size());
  n.extent = checked_mul(product(global_sizes), base.extent());
  n.flat = subarray_flat(global_sizes, subsizes, starts, order, base, n.size, n.extent);
  return make_node(std::move(n));
}

std::vector<Segment> view_map(const FileView& view, std::int64_t visible_start, std::int64_t nbytes) {
  if (nbytes < 0 || visible_start < 0) invalid("view_map: negative start or length");
  if (view.displacement < 0) invalid("view_map: negative displacement");
  std::vector<Segment> out;
  if (nbytes == 0) return out;

  const FlatRepr& flat = view.filetype.flat();
  if (flat.size == 0) invalid("view_map: filetype has no visible bytes");
  if (flat.contiguous()) {
    out.push_back({checked_add(view.displacement, visible_start), nbytes});
    checked_add(out.back().offset, nbytes);
    return out;
  }

  std::vector<std::int64_t> prefix(flat.segments.size());
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    prefix[i] = acc;
    acc += flat.segments[i].length;
  }

  const std::int64_t extent = view.filetype.extent();
  std::int64_t tile = visible_start / flat.size;
  const std::int64_t rem = visible_start % flat.size;
  std::size_t i = static_cast<std::size_t>(std::upper_bound(prefix.begin(), prefix.end(), rem) -
                                           prefix.begin() - 1);
  std::int64_t within = rem - prefix[i];
  std::int64_t remaining = nbytes;
  while (remaining > 0) {
    const Segment& seg = flat.segments[i];
    const std::int64_t take = std::min(seg.length - within, remaining);
    const std::int64_t origin = checked_add(view.displacement, checked_mul(tile, extent));
    append_merged(out, {checked_add(origin, seg.offset + within), take});
    remaining -= take;
    within = 0;
    if (++i == flat.segments.size()) {
      i = 0;
      ++tile;
    }
  }
  return out;
}

}  // namespace ncio
