#include "ncio/file.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>

#include "ncio/error.hpp"

namespace ncio {

namespace {

std::int64_t parse_positive(std::string_view key, std::string_view value) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || v < 1) {
    throw Error(Errc::invalid_argument,
                "hint " + std::string(key) + " needs a positive decimal value, got '" + std::string(value) + "'");
  }
  return v;
}

}  // namespace

Hints::Hints(std::initializer_list<std::pair<std::string, std::string>> pairs) {
  for (const auto& [k, v] : pairs) set(k, v);
}

bool Hints::is_known(std::string_view key) {
  return key == "cb_buffer_size" || key == "cb_nodes" || key == "ind_rd_buffer_size" ||
         key == "ind_wr_buffer_size";
}

void Hints::set(std::string_view key, std::string_view value) {
  if (key == "cb_buffer_size") {
    collective_.cb_buffer_size = parse_positive(key, value);
  } else if (key == "cb_nodes") {
    const std::int64_t n = parse_positive(key, value);
    if (n > std::numeric_limits<int>::max()) throw Error(Errc::invalid_argument, "cb_nodes too large");
    collective_.cb_nodes = static_cast<int>(n);
  } else if (key == "ind_rd_buffer_size") {
    sieve_.ind_rd_buffer_size = parse_positive(key, value);
  } else if (key == "ind_wr_buffer_size") {
    sieve_.ind_wr_buffer_size = parse_positive(key, value);
  }
  entries_.insert_or_assign(std::string(key), std::string(value));
}

std::optional<std::string> Hints::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

File::File(Communicator& comm, std::shared_ptr<StorageFile> storage, Hints hints)
    : comm_(&comm), storage_(std::move(storage)), hints_(std::move(hints)) {}

File File::open(Communicator& comm, std::shared_ptr<StorageFile> storage, Hints hints) {
  if (!storage) throw Error(Errc::invalid_argument, "no storage to open");
  comm.barrier();
  return File(comm, std::move(storage), std::move(hints));
}

File File::open(Communicator& comm, std::string_view backend, Hints hints, StorageFile::Options opts) {
  std::shared_ptr<StorageFile> storage;
  if (comm.rank() == 0) storage = StorageFile::open(backend, opts);
  storage = comm.share(0, std::move(storage));
  return File(comm, std::move(storage), std::move(hints));
}

void File::set_view(std::int64_t displacement, Datatype filetype) {
  if (displacement < 0) throw Error(Errc::invalid_argument, "view displacement must be non-negative");
  if (filetype.size() == 0) throw Error(Errc::invalid_argument, "filetype has no visible bytes");
  view_ = FileView{displacement, std::move(filetype)};
  position_ = 0;
}

void File::set_hints(const std::vector<std::pair<std::string, std::string>>& pairs) {
  Hints next = hints_;
  for (const auto& [k, v] : pairs) next.set(k, v);
  hints_ = std::move(next);
}

void File::seek(std::int64_t visible_offset) {
  if (visible_offset < 0) throw Error(Errc::invalid_argument, "negative file position");
  position_ = visible_offset;
}

IoStats File::read_indep(std::int64_t visible_offset, const MutableBuffer& mem) {
  const std::vector<Segment> segs = view_map(view_, visible_offset, mem.size());
  if (segs.size() <= 1) {
    last_level_ = RequestLevel::level0;
    return read_each(*storage_, segs, mem);
  }
  last_level_ = RequestLevel::level2;
  return sieve_read(*storage_, segs, mem, hints_.sieve());
}

IoStats File::write_indep(std::int64_t visible_offset, const ConstBuffer& mem) {
  const std::vector<Segment> segs = view_map(view_, visible_offset, mem.size());
  if (segs.size() <= 1) {
    last_level_ = RequestLevel::level0;
    return write_each(*storage_, segs, mem);
  }
  last_level_ = RequestLevel::level2;
  try {
    return sieve_write(*storage_, segs, mem, hints_.sieve());
  } catch (const Error& e) {
    if (e.code() != Errc::fallback_required) throw;
    return write_each(*storage_, segs, mem);
  }
}

bool File::any_rank_noncontiguous(bool mine, IoStats& tally) {
  const std::int64_t m0 = comm_->msgs_sent();
  const std::int64_t b0 = comm_->msg_bytes();
  const std::vector<std::uint8_t> flags = comm_->allgather<std::uint8_t>(mine ? 1 : 0);
  storage_->note_messages(comm_->msgs_sent() - m0, comm_->msg_bytes() - b0, &tally);
  return std::any_of(flags.begin(), flags.end(), [](std::uint8_t f) { return f != 0; });
}

IoStats File::read_coll(std::int64_t visible_offset, const MutableBuffer& mem) {
  const std::vector<Segment> segs = view_map(view_, visible_offset, mem.size());
  IoStats tally;
  // Routing must agree across ranks, so the level is decided collectively.
  if (!any_rank_noncontiguous(segs.size() > 1, tally)) {
    last_level_ = RequestLevel::level1;
    return tally + read_each(*storage_, segs, mem);
  }
  last_level_ = RequestLevel::level3;
  last_collective_ = collective_read(*comm_, *storage_, segs, mem, hints_.collective(), hints_.sieve());
  return tally + last_collective_.stats;
}

IoStats File::write_coll(std::int64_t visible_offset, const ConstBuffer& mem) {
  const std::vector<Segment> segs = view_map(view_, visible_offset, mem.size());
  IoStats tally;
  if (!any_rank_noncontiguous(segs.size() > 1, tally)) {
    last_level_ = RequestLevel::level1;
    return tally + write_each(*storage_, segs, mem);
  }
  last_level_ = RequestLevel::level3;
  last_collective_ = collective_write(*comm_, *storage_, segs, mem, hints_.collective(), hints_.sieve());
  return tally + last_collective_.stats;
}

IoStats File::read(const MutableBuffer& mem) {
  IoStats s = read_indep(position_, mem);
  position_ += mem.size();
  return s;
}

IoStats File::write(const ConstBuffer& mem) {
  IoStats s = write_indep(position_, mem);
  position_ += mem.size();
  return s;
}

IoStats File::read_all(const MutableBuffer& mem) {
  IoStats s = read_coll(position_, mem);
  position_ += mem.size();
  return s;
}

IoStats File::write_all(const ConstBuffer& mem) {
  IoStats s = write_coll(position_, mem);
  position_ += mem.size();
  return s;
}

}  // namespace ncio
