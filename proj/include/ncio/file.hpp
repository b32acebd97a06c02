#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ncio/backend.hpp"
#include "ncio/buffer.hpp"
#include "ncio/collective.hpp"
#include "ncio/fabric.hpp"
#include "ncio/layout.hpp"
#include "ncio/sieve.hpp"

namespace ncio {

/// How a request reaches the engines: {contiguous, noncontiguous} x
/// {independent, collective}.
enum class RequestLevel { level0 = 0, level1 = 1, level2 = 2, level3 = 3 };

constexpr RequestLevel classify(bool noncontiguous, bool collective) {
  return static_cast<RequestLevel>((noncontiguous ? 2 : 0) + (collective ? 1 : 0));
}

/// String key/value tuning parameters. Known keys must hold positive
/// decimal integers; anything else is kept but has no effect.
class Hints {
 public:
  Hints() = default;
  Hints(std::initializer_list<std::pair<std::string, std::string>> pairs);

  static bool is_known(std::string_view key);

  void set(std::string_view key, std::string_view value);
  std::optional<std::string> get(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

  const SieveConfig& sieve() const { return sieve_; }
  const CollectiveConfig& collective() const { return collective_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
  SieveConfig sieve_;
  CollectiveConfig collective_;
};

/// Per-rank handle on a file shared by a group. Offsets passed to the
/// read/write calls count visible bytes of this rank's view.
class File {
 public:
  /// Collective: every rank of `comm` must call it with the same storage.
  static File open(Communicator& comm, std::shared_ptr<StorageFile> storage, Hints hints = {});
  /// Collective: rank 0 opens `backend` ("mem" or "file:PATH") and shares it.
  static File open(Communicator& comm, std::string_view backend, Hints hints = {},
                   StorageFile::Options opts = {});

  void set_view(std::int64_t displacement, Datatype filetype);
  const FileView& view() const { return view_; }

  void set_hints(const std::vector<std::pair<std::string, std::string>>& pairs);
  const Hints& hints() const { return hints_; }

  IoStats read_indep(std::int64_t visible_offset, const MutableBuffer& mem);
  IoStats write_indep(std::int64_t visible_offset, const ConstBuffer& mem);
  IoStats read_coll(std::int64_t visible_offset, const MutableBuffer& mem);
  IoStats write_coll(std::int64_t visible_offset, const ConstBuffer& mem);

  /// Same as above at the independent file position, which then advances.
  IoStats read(const MutableBuffer& mem);
  IoStats write(const ConstBuffer& mem);
  IoStats read_all(const MutableBuffer& mem);
  IoStats write_all(const ConstBuffer& mem);

  std::int64_t position() const { return position_; }
  void seek(std::int64_t visible_offset);

  RequestLevel last_level() const { return last_level_; }
  /// Details of the most recent level-3 call.
  const CollectiveResult& last_collective() const { return last_collective_; }

  StorageFile& storage() { return *storage_; }
  Communicator& comm() { return *comm_; }

 private:
  File(Communicator& comm, std::shared_ptr<StorageFile> storage, Hints hints);

  bool any_rank_noncontiguous(bool mine, IoStats& tally);

  Communicator* comm_;
  std::shared_ptr<StorageFile> storage_;
  Hints hints_;
  FileView view_;
  std::int64_t position_ = 0;
  RequestLevel last_level_ = RequestLevel::level0;
  CollectiveResult last_collective_;
};

}  // namespace ncio
