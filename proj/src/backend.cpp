#include "ncio/backend.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <shared_mutex>
#include <utility>

#include "json.hpp"
#include "ncio/error.hpp"

namespace ncio {

IoStats& IoStats::operator+=(const IoStats& o) {
  read_calls += o.read_calls;
  write_calls += o.write_calls;
  bytes_read += o.bytes_read;
  bytes_written += o.bytes_written;
  useful_bytes_read += o.useful_bytes_read;
  useful_bytes_written += o.useful_bytes_written;
  lock_acquisitions += o.lock_acquisitions;
  msgs_sent += o.msgs_sent;
  msg_bytes += o.msg_bytes;
  return *this;
}

IoStats operator-(const IoStats& a, const IoStats& b) {
  IoStats d;
  d.read_calls = a.read_calls - b.read_calls;
  d.write_calls = a.write_calls - b.write_calls;
  d.bytes_read = a.bytes_read - b.bytes_read;
  d.bytes_written = a.bytes_written - b.bytes_written;
  d.useful_bytes_read = a.useful_bytes_read - b.useful_bytes_read;
  d.useful_bytes_written = a.useful_bytes_written - b.useful_bytes_written;
  d.lock_acquisitions = a.lock_acquisitions - b.lock_acquisitions;
  d.msgs_sent = a.msgs_sent - b.msgs_sent;
  d.msg_bytes = a.msg_bytes - b.msg_bytes;
  return d;
}

std::string to_json_string(const IoStats& s) {
  nlohmann::ordered_json j;
  j["read_calls"] = s.read_calls;
  j["write_calls"] = s.write_calls;
  j["bytes_read"] = s.bytes_read;
  j["bytes_written"] = s.bytes_written;
  j["useful_bytes_read"] = s.useful_bytes_read;
  j["useful_bytes_written"] = s.useful_bytes_written;
  j["lock_acquisitions"] = s.lock_acquisitions;
  j["msgs_sent"] = s.msgs_sent;
  j["msg_bytes"] = s.msg_bytes;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Range locks

RangeLock::RangeLock(RangeLock&& other) noexcept
    : table_(std::exchange(other.table_, nullptr)),
      id_(other.id_),
      offset_(other.offset_),
      length_(other.length_) {}

RangeLock& RangeLock::operator=(RangeLock&& other) noexcept {
  if (this != &other) {
    release();
    table_ = std::exchange(other.table_, nullptr);
    id_ = other.id_;
    offset_ = other.offset_;
    length_ = other.length_;
  }
  return *this;
}

RangeLock::~RangeLock() { release(); }

void RangeLock::release() {
  if (table_ != nullptr) std::exchange(table_, nullptr)->release(id_);
}

RangeLock LockTable::acquire(std::int64_t offset, std::int64_t length) {
  if (offset < 0 || length < 1) throw Error(Errc::invalid_argument, "lock range must be non-empty");
  std::unique_lock lk(mu_);
  const std::int64_t end = offset + length;
  cv_.wait(lk, [&] {
    return std::none_of(held_.begin(), held_.end(), [&](const Held& h) {
      return h.offset < end && offset < h.offset + h.length;
    });
  });
  const std::uint64_t id = next_id_++;
  held_.push_back({id, offset, length});
  return RangeLock(this, id, offset, length);
}

void LockTable::release(std::uint64_t id) {
  {
    std::lock_guard lk(mu_);
    std::erase_if(held_, [id](const Held& h) { return h.id == id; });
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Stores

namespace {

class MemoryStore final : public ByteStore {
 public:
  std::int64_t size() const override {
    std::shared_lock lk(mu_);
    return static_cast<std::int64_t>(bytes_.size());
  }

  std::int64_t read(std::int64_t offset, std::span<std::byte> dest) override {
    std::shared_lock lk(mu_);
    const auto sz = static_cast<std::int64_t>(bytes_.size());
    if (offset >= sz) return 0;
    const std::int64_t n = std::min<std::int64_t>(static_cast<std::int64_t>(dest.size()), sz - offset);
    std::memcpy(dest.data(), bytes_.data() + offset, static_cast<std::size_t>(n));
    return n;
  }

  void write(std::int64_t offset, std::span<const std::byte> src) override {
    std::unique_lock lk(mu_);
    const auto end = static_cast<std::size_t>(offset) + src.size();
    if (end > bytes_.size()) bytes_.resize(end, std::byte{0});
    if (!src.empty()) std::memcpy(bytes_.data() + offset, src.data(), src.size());
  }

 private:
  mutable std::shared_mutex mu_;
  std::vector<std::byte> bytes_;
};

class PosixStore final : public ByteStore {
 public:
  PosixStore(const std::string& path, bool truncate) {
    int flags = O_RDWR | O_CREAT | O_CLOEXEC;
    if (truncate) flags |= O_TRUNC;
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0) throw Error(Errc::io_error, "open " + path + ": " + std::strerror(errno));
  }
  ~PosixStore() override { ::close(fd_); }
  PosixStore(const PosixStore&) = delete;
  PosixStore& operator=(const PosixStore&) = delete;

  std::int64_t size() const override {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw Error(Errc::io_error, std::string("fstat: ") + std::strerror(errno));
    return st.st_size;
  }

  std::int64_t read(std::int64_t offset, std::span<std::byte> dest) override {
    std::size_t done = 0;
    while (done < dest.size()) {
      const ssize_t n = ::pread(fd_, dest.data() + done, dest.size() - done,
                                static_cast<off_t>(offset + static_cast<std::int64_t>(done)));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::io_error, std::string("pread: ") + std::strerror(errno));
      }
      if (n == 0) break;
      done += static_cast<std::size_t>(n);
    }
    return static_cast<std::int64_t>(done);
  }

  void write(std::int64_t offset, std::span<const std::byte> src) override {
    std::size_t done = 0;
    while (done < src.size()) {
      const ssize_t n = ::pwrite(fd_, src.data() + done, src.size() - done,
                                 static_cast<off_t>(offset + static_cast<std::int64_t>(done)));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::io_error, std::string("pwrite: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_ = -1;
};

}  // namespace

// ---------------------------------------------------------------------------
// StorageFile

StorageFile::StorageFile(std::unique_ptr<ByteStore> store, Options opts)
    : store_(std::move(store)), opts_(opts) {}

std::shared_ptr<StorageFile> StorageFile::in_memory(Options opts) {
  return std::make_shared<StorageFile>(std::make_unique<MemoryStore>(), opts);
}

std::shared_ptr<StorageFile> StorageFile::on_disk(const std::string& path, Options opts,
                                                  bool truncate) {
  return std::make_shared<StorageFile>(std::make_unique<PosixStore>(path, truncate), opts);
}

std::shared_ptr<StorageFile> StorageFile::open(std::string_view backend, Options opts) {
  if (backend == "mem") return in_memory(opts);
  if (backend.starts_with("file:") && backend.size() > 5) {
    return on_disk(std::string(backend.substr(5)), opts);
  }
  throw Error(Errc::invalid_argument, "unknown backend '" + std::string(backend) + "'");
}

ReadResult StorageFile::read_contig(std::int64_t offset, std::span<std::byte> dest, IoStats* tally) {
  if (offset < 0) throw Error(Errc::invalid_argument, "negative read offset");
  const std::int64_t n = store_->read(offset, dest);
  totals_.read_calls += 1;
  totals_.bytes_read += n;
  if (tally != nullptr) {
    tally->read_calls += 1;
    tally->bytes_read += n;
  }
  return {n, static_cast<std::int64_t>(dest.size()) - n};
}

std::int64_t StorageFile::write_contig(std::int64_t offset, std::span<const std::byte> src,
                                       IoStats* tally) {
  if (offset < 0) throw Error(Errc::invalid_argument, "negative write offset");
  store_->write(offset, src);
  const auto n = static_cast<std::int64_t>(src.size());
  totals_.write_calls += 1;
  totals_.bytes_written += n;
  if (tally != nullptr) {
    tally->write_calls += 1;
    tally->bytes_written += n;
  }
  return n;
}

RangeLock StorageFile::lock_range(std::int64_t offset, std::int64_t length, IoStats* tally) {
  if (!opts_.locking) throw Error(Errc::unsupported, "file system does not support byte-range locks");
  RangeLock lock = locks_.acquire(offset, length);
  totals_.lock_acquisitions += 1;
  if (tally != nullptr) tally->lock_acquisitions += 1;
  return lock;
}

void StorageFile::note_useful(std::int64_t read, std::int64_t written, IoStats* tally) {
  totals_.useful_bytes_read += read;
  totals_.useful_bytes_written += written;
  if (tally != nullptr) {
    tally->useful_bytes_read += read;
    tally->useful_bytes_written += written;
  }
}

void StorageFile::note_messages(std::int64_t msgs, std::int64_t bytes, IoStats* tally) {
  totals_.msgs_sent += msgs;
  totals_.msg_bytes += bytes;
  if (tally != nullptr) {
    tally->msgs_sent += msgs;
    tally->msg_bytes += bytes;
  }
}

IoStats StorageFile::stats() const {
  IoStats s;
  s.read_calls = totals_.read_calls;
  s.write_calls = totals_.write_calls;
  s.bytes_read = totals_.bytes_read;
  s.bytes_written = totals_.bytes_written;
  s.useful_bytes_read = totals_.useful_bytes_read;
  s.useful_bytes_written = totals_.useful_bytes_written;
  s.lock_acquisitions = totals_.lock_acquisitions;
  s.msgs_sent = totals_.msgs_sent;
  s.msg_bytes = totals_.msg_bytes;
  return s;
}

}  // namespace ncio
