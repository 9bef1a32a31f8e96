#pragma once

#include <cstddef>
#include <deque>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "intersad/common.hpp"
#include "intersad/mdp_core.hpp"

namespace intersad {

inline constexpr std::size_t kDefaultReplayCapacity = 1'000'000;

// Bounded FIFO of interaction tuples with uniform sampling (with replacement).
template <class Record>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = kDefaultReplayCapacity, std::uint64_t seed = 0)
      : capacity_(capacity), rng_(seed) {
    require(capacity_ >= 1, "replay capacity must be positive");
  }

  void push(std::span<const Record> records) {
    for (const auto& r : records) {
      storage_.push_back(r);
      if (storage_.size() > capacity_) storage_.pop_front();
    }
  }
  void push(const Record& record) { push(std::span<const Record>(&record, 1)); }

  std::vector<Record> sample(std::size_t count) {
    require(!storage_.empty(), "cannot sample before first interaction: replay buffer is empty");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<Record> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(storage_[pick(rng_)]);
    return out;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  const std::deque<Record>& contents() const { return storage_; }

 private:
  std::size_t capacity_;
  std::deque<Record> storage_;
  Rng rng_;
};

// A record tagged with the training iteration that produced it.
struct StampedRecord {
  InteractionRecord record;
  std::size_t iteration = 0;
  friend bool operator==(const StampedRecord&, const StampedRecord&) = default;
};

// Writes the buffer as newline-delimited JSON records, oldest first.
template <class Record, class ToJson>
void spill_ndjson(const ReplayBuffer<Record>& buffer, const std::string& path, ToJson&& to_json_fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& r : buffer.contents()) out << to_json_fn(r).dump() << '\n';
}

}  // namespace intersad
