#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <type_traits>
#include <vector>

#include "ncio/error.hpp"
#include "ncio/layout.hpp"

namespace ncio {

/// Placement of a request's data stream inside a user buffer: stream byte k
/// is the k-th byte covered by `layout`, in ascending offset order.
template <class Byte>
class BufferView {
  static_assert(std::is_same_v<std::remove_const_t<Byte>, std::byte>);

 public:
  /// Contiguous placement over the whole span.
  explicit BufferView(std::span<Byte> buffer)
      : buffer_(buffer),
        layout_(std::make_shared<const FlatRepr>(FlatRepr{
            buffer.empty() ? std::vector<Segment>{}
                           : std::vector<Segment>{{0, static_cast<std::int64_t>(buffer.size())}},
            static_cast<std::int64_t>(buffer.size()), static_cast<std::int64_t>(buffer.size())})) {}

  BufferView(std::span<Byte> buffer, FlatRepr layout)
      : buffer_(buffer), layout_(std::make_shared<const FlatRepr>(std::move(layout))) {
    if (!layout_->segments.empty() &&
        layout_->segments.back().end() > static_cast<std::int64_t>(buffer.size())) {
      throw Error(Errc::invalid_argument, "memory layout extends past the buffer");
    }
    if (layout_->segments.size() > 1) {
      auto prefix = std::make_shared<std::vector<std::int64_t>>();
      prefix->reserve(layout_->segments.size());
      std::int64_t acc = 0;
      for (const Segment& s : layout_->segments) {
        prefix->push_back(acc);
        acc += s.length;
      }
      prefix_ = std::move(prefix);
    }
  }

  /// Mutable views convert to read-only ones.
  template <class Other>
    requires(std::is_const_v<Byte> && !std::is_const_v<Other>)
  BufferView(const BufferView<Other>& other)
      : buffer_(other.buffer_), layout_(other.layout_), prefix_(other.prefix_) {}

  std::int64_t size() const { return layout_->size; }
  bool contiguous() const { return layout_->segments.size() <= 1; }
  std::span<Byte> buffer() const { return buffer_; }
  const FlatRepr& layout() const { return *layout_; }

  /// Calls fn(std::span<Byte>) for each buffer run holding stream bytes
  /// [pos, pos + n), in order.
  template <class Fn>
  void for_each_run(std::int64_t pos, std::int64_t n, Fn&& fn) const {
    if (n <= 0) return;
    if (pos < 0 || pos + n > size()) throw Error(Errc::invalid_argument, "stream range outside buffer view");
    const auto& segs = layout_->segments;
    if (segs.size() == 1) {
      fn(buffer_.subspan(static_cast<std::size_t>(segs[0].offset + pos), static_cast<std::size_t>(n)));
      return;
    }
    const auto& prefix = *prefix_;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(prefix.begin(), prefix.end(), pos) - prefix.begin() - 1);
    std::int64_t within = pos - prefix[i];
    while (n > 0) {
      const std::int64_t take = std::min(segs[i].length - within, n);
      fn(buffer_.subspan(static_cast<std::size_t>(segs[i].offset + within), static_cast<std::size_t>(take)));
      n -= take;
      within = 0;
      ++i;
    }
  }

  /// Copies stream bytes [pos, pos + out.size()) into `out`.
  void gather(std::int64_t pos, std::span<std::byte> out) const {
    std::size_t at = 0;
    for_each_run(pos, static_cast<std::int64_t>(out.size()), [&](std::span<Byte> run) {
      std::memcpy(out.data() + at, run.data(), run.size());
      at += run.size();
    });
  }

  /// Copies `in` into stream bytes [pos, pos + in.size()).
  void scatter(std::int64_t pos, std::span<const std::byte> in) const
    requires(!std::is_const_v<Byte>)
  {
    std::size_t at = 0;
    for_each_run(pos, static_cast<std::int64_t>(in.size()), [&](std::span<Byte> run) {
      std::memcpy(run.data(), in.data() + at, run.size());
      at += run.size();
    });
  }

 private:
  template <class>
  friend class BufferView;

  std::span<Byte> buffer_;
  std::shared_ptr<const FlatRepr> layout_;
  std::shared_ptr<const std::vector<std::int64_t>> prefix_;
};

using MutableBuffer = BufferView<std::byte>;
using ConstBuffer = BufferView<const std::byte>;

}  // namespace ncio
