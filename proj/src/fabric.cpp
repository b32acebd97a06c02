#include "ncio/fabric.hpp"

#include <algorithm>
#include <string>
#include <thread>

namespace ncio {

namespace {
constexpr int kCollectiveTagBase = kMaxUserTag + 1;
}

RankGroup::RankGroup(int nprocs, GroupOptions opts)
    : nprocs_(nprocs),
      opts_(opts),
      cvs_(static_cast<std::size_t>(nprocs)),
      boxes_(static_cast<std::size_t>(nprocs)),
      states_(static_cast<std::size_t>(nprocs)),
      rng_(opts.seed) {
  if (nprocs < 1) throw Error(Errc::invalid_argument, "a rank group needs at least one rank");
  if (opts_.schedule == Schedule::deterministic) {
    std::unique_lock lk(mu_);
    hand_off(lk);
  }
}

bool RankGroup::has_message(int me, int src, int tag) const {
  const auto& box = boxes_[me];
  const auto it = box.find({src, tag});
  return it != box.end() && !it->second.empty();
}

bool RankGroup::runnable(int r) const {
  const RankState& s = states_[r];
  if (s.state == State::ready) return true;
  return s.state == State::blocked && has_message(r, s.want_src, s.want_tag);
}

void RankGroup::hand_off(std::unique_lock<std::mutex>&) {
  std::vector<int> candidates;
  bool any_live = false;
  for (int r = 0; r < nprocs_; ++r) {
    if (states_[r].state != State::done) any_live = true;
    if (runnable(r)) candidates.push_back(r);
  }
  if (candidates.empty()) {
    active_ = -1;
    if (any_live && !aborted_) {
      aborted_ = true;
      abort_code_ = Errc::protocol;
      abort_reason_ = "deadlock: every live rank is blocked on a receive";
      for (auto& cv : cvs_) cv.notify_all();
    }
    return;
  }
  active_ = candidates[rng_() % candidates.size()];
  cvs_[active_].notify_all();
}

void RankGroup::wait_turn(std::unique_lock<std::mutex>& lk, int rank) {
  cvs_[rank].wait(lk, [&] { return aborted_ || active_ == rank; });
}

void RankGroup::enter(int rank) {
  if (opts_.schedule != Schedule::deterministic) return;
  std::unique_lock lk(mu_);
  wait_turn(lk, rank);
}

void RankGroup::leave(int rank) {
  std::unique_lock lk(mu_);
  states_[rank].state = State::done;
  if (opts_.schedule == Schedule::deterministic && active_ == rank) hand_off(lk);
}

void RankGroup::abort_locked(Errc code, std::string reason) {
  if (aborted_) return;
  aborted_ = true;
  abort_code_ = code;
  abort_reason_ = std::move(reason);
  for (auto& cv : cvs_) cv.notify_all();
}

void RankGroup::abort(int rank) {
  std::unique_lock lk(mu_);
  abort_locked(Errc::aborted, "rank " + std::to_string(rank) + " failed");
}

void RankGroup::post(int src, int dst, int tag, std::vector<std::byte> payload) {
  if (dst < 0 || dst >= nprocs_) throw Error(Errc::invalid_argument, "send to rank out of range");
  std::unique_lock lk(mu_);
  if (aborted_) throw Error(abort_code_, abort_reason_);
  if (opts_.log != nullptr) {
    log_.push_back({src, dst, tag, static_cast<std::int64_t>(payload.size())});
  }
  boxes_[dst][{src, tag}].push_back(std::move(payload));
  if (opts_.schedule == Schedule::threaded) cvs_[dst].notify_all();
}

std::vector<std::byte> RankGroup::take(int me, int src, int tag) {
  if (src < 0 || src >= nprocs_) throw Error(Errc::invalid_argument, "receive from rank out of range");
  std::unique_lock lk(mu_);
  if (opts_.schedule == Schedule::deterministic) {
    while (!aborted_ && !has_message(me, src, tag)) {
      states_[me] = {State::blocked, src, tag};
      hand_off(lk);
      wait_turn(lk, me);
      states_[me].state = State::ready;
    }
  } else {
    auto ready = [&] { return aborted_ || has_message(me, src, tag); };
    if (opts_.recv_timeout.count() > 0) {
      if (!cvs_[me].wait_for(lk, opts_.recv_timeout, ready)) {
        abort_locked(Errc::aborted, "rank " + std::to_string(me) + " timed out");
        throw Error(Errc::timeout, "rank " + std::to_string(me) + " waited too long for a message from rank " +
                                       std::to_string(src));
      }
    } else {
      cvs_[me].wait(lk, ready);
    }
  }
  if (aborted_) throw Error(abort_code_, abort_reason_);
  auto& box = boxes_[me];
  auto it = box.find({src, tag});
  std::vector<std::byte> payload = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) box.erase(it);
  return payload;
}

void RankGroup::put_shared(std::uint64_t key, std::shared_ptr<void> obj) {
  std::lock_guard lk(mu_);
  if (nprocs_ > 1) shared_[key] = {std::move(obj), nprocs_ - 1};
}

std::shared_ptr<void> RankGroup::get_shared(std::uint64_t key) {
  std::lock_guard lk(mu_);
  auto it = shared_.find(key);
  if (it == shared_.end()) throw Error(Errc::protocol, "shared object missing");
  std::shared_ptr<void> obj = it->second.first;
  if (--it->second.second == 0) shared_.erase(it);
  return obj;
}

std::vector<MessageRecord> RankGroup::log() const {
  std::lock_guard lk(mu_);
  return log_;
}

// ---------------------------------------------------------------------------

void Communicator::send(int dst, int tag, std::vector<std::byte> payload) {
  if (tag < 0 || tag > kMaxUserTag) throw Error(Errc::invalid_argument, "tag out of user range");
  msgs_sent_ += 1;
  msg_bytes_ += static_cast<std::int64_t>(payload.size());
  group_->post(rank_, dst, tag, std::move(payload));
}

std::vector<std::byte> Communicator::recv(int src, int tag) { return group_->take(rank_, src, tag); }

int Communicator::next_collective_tag() {
  const int tag = kCollectiveTagBase + static_cast<int>(collective_seq_ % static_cast<std::uint32_t>(kCollectiveTagBase));
  ++collective_seq_;
  return tag;
}

void Communicator::send_op(int dst, int tag, Op op, std::span<const std::byte> body) {
  std::vector<std::byte> payload(body.size() + 1);
  payload[0] = static_cast<std::byte>(op);
  std::copy(body.begin(), body.end(), payload.begin() + 1);
  msgs_sent_ += 1;
  msg_bytes_ += static_cast<std::int64_t>(body.size());
  group_->post(rank_, dst, tag, std::move(payload));
}

std::vector<std::byte> Communicator::recv_op(int src, int tag, Op op) {
  std::vector<std::byte> payload = group_->take(rank_, src, tag);
  if (payload.empty() || payload[0] != static_cast<std::byte>(op)) {
    throw Error(Errc::protocol, "rank " + std::to_string(rank_) +
                                    ": collective call does not match the one issued by rank " +
                                    std::to_string(src));
  }
  payload.erase(payload.begin());
  return payload;
}

std::vector<std::vector<std::byte>> Communicator::allgather_bytes(Op op, std::vector<std::byte> mine) {
  const int tag = next_collective_tag();
  const int n = size();
  for (int d = 0; d < n; ++d) {
    if (d != rank_) send_op(d, tag, op, mine);
  }
  std::vector<std::vector<std::byte>> all(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    all[s] = s == rank_ ? mine : recv_op(s, tag, op);
  }
  return all;
}

std::vector<std::byte> Communicator::broadcast_bytes(int root, std::vector<std::byte> bytes) {
  if (root < 0 || root >= size()) throw Error(Errc::invalid_argument, "broadcast root out of range");
  const int tag = next_collective_tag();
  if (rank_ == root) {
    for (int d = 0; d < size(); ++d) {
      if (d != rank_) send_op(d, tag, Op::broadcast, bytes);
    }
    return bytes;
  }
  return recv_op(root, tag, Op::broadcast);
}

std::int64_t Communicator::global_max(std::int64_t value) {
  const std::vector<std::int64_t> all = allgather(value);
  return *std::max_element(all.begin(), all.end());
}

std::vector<std::int64_t> Communicator::alltoall(std::span<const std::int64_t> per_dest) {
  const int n = size();
  if (static_cast<int>(per_dest.size()) != n) throw Error(Errc::invalid_argument, "alltoall needs one value per rank");
  const int tag = next_collective_tag();
  for (int d = 0; d < n; ++d) {
    if (d == rank_) continue;
    std::byte body[sizeof(std::int64_t)];
    std::memcpy(body, &per_dest[d], sizeof body);
    send_op(d, tag, Op::alltoall, body);
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    if (s == rank_) {
      out[s] = per_dest[s];
      continue;
    }
    const std::vector<std::byte> body = recv_op(s, tag, Op::alltoall);
    if (body.size() != sizeof(std::int64_t)) throw Error(Errc::protocol, "alltoall element size mismatch");
    std::memcpy(&out[s], body.data(), sizeof(std::int64_t));
  }
  return out;
}

void Communicator::barrier() { allgather_bytes(Op::barrier, {}); }

std::shared_ptr<void> Communicator::share_void(int root, std::shared_ptr<void> obj) {
  if (root < 0 || root >= size()) throw Error(Errc::invalid_argument, "share root out of range");
  const std::uint64_t key = collective_seq_;
  const int tag = next_collective_tag();
  if (rank_ == root) {
    group_->put_shared(key, obj);
    for (int d = 0; d < size(); ++d) {
      if (d != rank_) send_op(d, tag, Op::share, {});
    }
    return obj;
  }
  recv_op(root, tag, Op::share);
  return group_->get_shared(key);
}

// ---------------------------------------------------------------------------

void run_ranks(int nprocs, const std::function<void(Communicator&)>& program, GroupOptions opts) {
  RankGroup group(nprocs, opts);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nprocs));
  std::vector<int> failure_order;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(nprocs));
    for (int r = 0; r < nprocs; ++r) {
      threads.emplace_back([&, r] {
        Communicator comm(group, r);
        try {
          group.enter(r);
          program(comm);
        } catch (...) {
          errors[r] = std::current_exception();
          {
            std::lock_guard lk(failure_mu);
            failure_order.push_back(r);
          }
          group.abort(r);
        }
        group.leave(r);
      });
    }
  }
  if (opts.log != nullptr) *opts.log = group.log();
  if (failure_order.empty()) return;

  // Prefer the error that started the cascade over the aborts it caused.
  for (int r : failure_order) {
    try {
      std::rethrow_exception(errors[r]);
    } catch (const Error& e) {
      if (e.code() == Errc::aborted) continue;
      throw;
    }
  }
  std::rethrow_exception(errors[failure_order.front()]);
}

}  // namespace ncio
