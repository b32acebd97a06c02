#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ncio {

/// Counters for one operation, one rank, or one whole file. Plain values;
/// StorageFile keeps an atomic twin for file-wide totals.
struct IoStats {
  std::int64_t read_calls = 0;
  std::int64_t write_calls = 0;
  std::int64_t bytes_read = 0;
  std::int64_t bytes_written = 0;
  std::int64_t useful_bytes_read = 0;
  std::int64_t useful_bytes_written = 0;
  std::int64_t lock_acquisitions = 0;
  std::int64_t msgs_sent = 0;
  std::int64_t msg_bytes = 0;

  IoStats& operator+=(const IoStats& o);
  friend IoStats operator+(IoStats a, const IoStats& b) { return a += b; }
  friend IoStats operator-(const IoStats& a, const IoStats& b);
  friend bool operator==(const IoStats&, const IoStats&) = default;
};

/// One JSON object with exactly the counter names as keys.
std::string to_json_string(const IoStats& s);

struct ReadResult {
  std::int64_t nread = 0;    // bytes actually returned
  std::int64_t missing = 0;  // requested bytes past end-of-file
};

/// Raw contiguous byte store. Implementations must tolerate concurrent calls.
class ByteStore {
 public:
  virtual ~ByteStore() = default;
  virtual std::int64_t size() const = 0;
  virtual std::int64_t read(std::int64_t offset, std::span<std::byte> dest) = 0;
  virtual void write(std::int64_t offset, std::span<const std::byte> src) = 0;
};

class LockTable;

/// Exclusive hold on [offset, offset + length) of one file. Released on
/// destruction.
class RangeLock {
 public:
  RangeLock() = default;
  RangeLock(RangeLock&& other) noexcept;
  RangeLock& operator=(RangeLock&& other) noexcept;
  RangeLock(const RangeLock&) = delete;
  RangeLock& operator=(const RangeLock&) = delete;
  ~RangeLock();

  bool held() const { return table_ != nullptr; }
  std::int64_t offset() const { return offset_; }
  std::int64_t length() const { return length_; }
  void release();

 private:
  friend class LockTable;
  RangeLock(LockTable* table, std::uint64_t id, std::int64_t offset, std::int64_t length)
      : table_(table), id_(id), offset_(offset), length_(length) {}

  LockTable* table_ = nullptr;
  std::uint64_t id_ = 0;
  std::int64_t offset_ = 0;
  std::int64_t length_ = 0;
};

class LockTable {
 public:
  RangeLock acquire(std::int64_t offset, std::int64_t length);

 private:
  friend class RangeLock;
  void release(std::uint64_t id);

  struct Held {
    std::uint64_t id;
    std::int64_t offset;
    std::int64_t length;
  };
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Held> held_;
  std::uint64_t next_id_ = 1;
};

struct StorageOptions {
  bool locking = true;  // false models a file system without byte-range locks
};

/// Instrumented contiguous-access file shared by every rank of a group.
class StorageFile {
 public:
  using Options = StorageOptions;

  StorageFile(std::unique_ptr<ByteStore> store, Options opts);

  static std::shared_ptr<StorageFile> in_memory(Options opts = {});
  static std::shared_ptr<StorageFile> on_disk(const std::string& path, Options opts = {},
                                              bool truncate = true);
  /// "mem" or "file:PATH".
  static std::shared_ptr<StorageFile> open(std::string_view backend, Options opts = {});

  /// Reads up to dest.size() bytes; bytes past EOF are reported as missing.
  ReadResult read_contig(std::int64_t offset, std::span<std::byte> dest, IoStats* tally = nullptr);
  /// Writes all of src, zero-filling any gap past the current size.
  std::int64_t write_contig(std::int64_t offset, std::span<const std::byte> src,
                            IoStats* tally = nullptr);
  /// Throws Error(unsupported) when the file was opened without locking.
  RangeLock lock_range(std::int64_t offset, std::int64_t length, IoStats* tally = nullptr);

  /// Records bytes the user asked for, as opposed to bytes moved.
  void note_useful(std::int64_t read, std::int64_t written, IoStats* tally = nullptr);
  void note_messages(std::int64_t msgs, std::int64_t bytes, IoStats* tally = nullptr);

  bool supports_locking() const { return opts_.locking; }
  std::int64_t size() const { return store_->size(); }
  IoStats stats() const;

 private:
  struct Counters {
    std::atomic<std::int64_t> read_calls{0}, write_calls{0}, bytes_read{0}, bytes_written{0},
        useful_bytes_read{0}, useful_bytes_written{0}, lock_acquisitions{0}, msgs_sent{0},
        msg_bytes{0};
  };

  std::unique_ptr<ByteStore> store_;
  Options opts_;
  LockTable locks_;
  Counters totals_;
};

}  // namespace ncio
