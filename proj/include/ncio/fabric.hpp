#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ncio/error.hpp"

namespace ncio {

enum class Schedule {
  threaded,       // every rank runs freely on its own thread
  deterministic,  // one rank runs at a time; hand-off order drawn from the seed
};

struct MessageRecord {
  int src = 0;
  int dst = 0;
  int tag = 0;
  std::int64_t bytes = 0;
  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

struct GroupOptions {
  Schedule schedule = Schedule::threaded;
  std::uint64_t seed = 0;
  /// Zero waits forever. Otherwise a receive that waits longer fails with
  /// Error(timeout) and aborts the group.
  std::chrono::milliseconds recv_timeout{0};
  /// When set, receives every message in send order once the run completes.
  std::vector<MessageRecord>* log = nullptr;
};

/// Largest tag available to callers; higher tags are reserved for the
/// built-in collectives.
inline constexpr int kMaxUserTag = (1 << 30) - 1;

/// Mailboxes and scheduling shared by the rank tasks of one run.
class RankGroup {
 public:
  RankGroup(int nprocs, GroupOptions opts);

  int size() const { return nprocs_; }

  void post(int src, int dst, int tag, std::vector<std::byte> payload);
  std::vector<std::byte> take(int me, int src, int tag);

  void enter(int rank);
  void leave(int rank);
  void abort(int rank);

  void put_shared(std::uint64_t key, std::shared_ptr<void> obj);
  std::shared_ptr<void> get_shared(std::uint64_t key);

  std::vector<MessageRecord> log() const;

 private:
  enum class State { ready, blocked, done };
  struct RankState {
    State state = State::ready;
    int want_src = 0;
    int want_tag = 0;
  };
  using Key = std::pair<int, int>;  // (src, tag)

  bool has_message(int me, int src, int tag) const;
  bool runnable(int r) const;
  void hand_off(std::unique_lock<std::mutex>& lk);
  void wait_turn(std::unique_lock<std::mutex>& lk, int rank);
  void abort_locked(Errc code, std::string reason);

  const int nprocs_;
  const GroupOptions opts_;
  mutable std::mutex mu_;
  std::vector<std::condition_variable> cvs_;
  std::vector<std::map<Key, std::deque<std::vector<std::byte>>>> boxes_;
  std::vector<RankState> states_;
  std::vector<MessageRecord> log_;
  std::map<std::uint64_t, std::pair<std::shared_ptr<void>, int>> shared_;
  std::mt19937_64 rng_;
  int active_ = -1;
  bool aborted_ = false;
  Errc abort_code_ = Errc::aborted;
  std::string abort_reason_;
};

/// One rank's endpoint. Internally sequential; distinct ranks may call
/// concurrently.
class Communicator {
 public:
  Communicator(RankGroup& group, int rank) : group_(&group), rank_(rank) {}

  int rank() const { return rank_; }
  int size() const { return group_->size(); }

  void send(int dst, int tag, std::vector<std::byte> payload);
  void send(int dst, int tag, std::span<const std::byte> payload) {
    send(dst, tag, std::vector<std::byte>(payload.begin(), payload.end()));
  }
  std::vector<std::byte> recv(int src, int tag);

  /// Receive posted now, completed by wait(). Mailboxes are unbounded, so
  /// posting order affects nothing but the protocol shape.
  class PendingRecv {
   public:
    std::vector<std::byte> wait() { return comm_->recv(src_, tag_); }
    int source() const { return src_; }

   private:
    friend class Communicator;
    PendingRecv(Communicator* comm, int src, int tag) : comm_(comm), src_(src), tag_(tag) {}
    Communicator* comm_;
    int src_;
    int tag_;
  };
  PendingRecv irecv(int src, int tag) { return PendingRecv(this, src, tag); }

  template <class T>
  std::vector<T> allgather(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<std::byte> mine(sizeof(T));
    std::memcpy(mine.data(), &value, sizeof(T));
    std::vector<std::vector<std::byte>> all = allgather_bytes(Op::allgather, std::move(mine));
    std::vector<T> out(all.size());
    for (std::size_t r = 0; r < all.size(); ++r) {
      if (all[r].size() != sizeof(T)) throw Error(Errc::protocol, "allgather element size mismatch");
      std::memcpy(&out[r], all[r].data(), sizeof(T));
    }
    return out;
  }

  template <class T>
  T broadcast(int root, const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<std::byte> bytes(sizeof(T));
    std::memcpy(bytes.data(), &value, sizeof(T));
    bytes = broadcast_bytes(root, std::move(bytes));
    T out;
    std::memcpy(&out, bytes.data(), sizeof(T));
    return out;
  }

  std::int64_t global_max(std::int64_t value);
  /// per_dest[d] goes to rank d; returns what every rank sent to this one.
  std::vector<std::int64_t> alltoall(std::span<const std::int64_t> per_dest);
  void barrier();

  /// Hands the root's object to every rank (in-process only).
  template <class T>
  std::shared_ptr<T> share(int root, std::shared_ptr<T> obj) {
    return std::static_pointer_cast<T>(share_void(root, std::move(obj)));
  }

  std::int64_t msgs_sent() const { return msgs_sent_; }
  std::int64_t msg_bytes() const { return msg_bytes_; }

 private:
  enum class Op : std::uint8_t { allgather = 1, broadcast, alltoall, barrier, share };

  int next_collective_tag();
  std::vector<std::vector<std::byte>> allgather_bytes(Op op, std::vector<std::byte> mine);
  std::vector<std::byte> broadcast_bytes(int root, std::vector<std::byte> bytes);
  std::shared_ptr<void> share_void(int root, std::shared_ptr<void> obj);
  void send_op(int dst, int tag, Op op, std::span<const std::byte> body);
  std::vector<std::byte> recv_op(int src, int tag, Op op);

  RankGroup* group_;
  int rank_;
  std::uint32_t collective_seq_ = 0;
  std::int64_t msgs_sent_ = 0;
  std::int64_t msg_bytes_ = 0;
};

/// Runs `program(comm)` once per rank and joins. If any rank throws, the
/// others are aborted and the first originating error is rethrown.
void run_ranks(int nprocs, const std::function<void(Communicator&)>& program, GroupOptions opts = {});

template <class F>
auto run_collective(int nprocs, F&& program, GroupOptions opts = {}) {
  using R = std::invoke_result_t<F&, Communicator&>;
  if constexpr (std::is_void_v<R>) {
    run_ranks(nprocs, [&](Communicator& c) { program(c); }, opts);
  } else {
    std::vector<std::optional<R>> slots(static_cast<std::size_t>(std::max(nprocs, 0)));
    run_ranks(nprocs, [&](Communicator& c) { slots[c.rank()].emplace(program(c)); }, opts);
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
  }
}

}  // namespace ncio
