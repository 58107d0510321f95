//  Copyright 2026 The LSS Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lss/common.hpp"
#include "lss/wire.hpp"

namespace lss::pipeline {

/// Bounded FIFO with blocking push (backpressure) and blocking pop.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidInput("queue capacity must be positive");
  }

  /// Blocks while full. Returns false if the queue was closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return take(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mu_);
    return take(lock);
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::optional<T> take(std::unique_lock<std::mutex>&) {
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// A published message. Payloads are shared immutably between subscribers.
struct Message {
  std::string producer;
  std::uint64_t sequence = 0;
  std::shared_ptr<const wire::Bytes> payload;
};

using Subscription = std::shared_ptr<BoundedQueue<Message>>;

/// In-process publish/subscribe bus. Every subscriber of a topic observes
/// that topic's messages in one global publish order; a subscriber joining
/// late sees only later messages. Publishing blocks while any subscriber's
/// channel is full.
class TopicBus {
 public:
  explicit TopicBus(std::size_t channel_capacity = 1024) : channel_capacity_(channel_capacity) {}

  Subscription subscribe(const std::string& topic) {
    Topic& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    auto q = std::make_shared<BoundedQueue<Message>>(channel_capacity_);
    if (t.closed) q->close();
    t.subscribers.push_back(q);
    return q;
  }

  void publish(const std::string& topic, Message msg) {
    Topic& t = topic_for(topic);
    // Held across the fan-out so all subscribers see the same interleaving.
    std::lock_guard lock(t.mu);
    if (t.closed) throw InvalidInput("publish to closed topic '" + topic + "'");
    for (auto& q : t.subscribers) q->push(msg);
    ++t.published;
  }

  /// Ends the topic: subscribers drain what is queued, then see end-of-stream.
  void close(const std::string& topic) {
    Topic& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    t.closed = true;
    for (auto& q : t.subscribers) q->close();
  }

  std::uint64_t published(const std::string& topic) {
    Topic& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    return t.published;
  }

 private:
  struct Topic {
    std::mutex mu;
    std::vector<Subscription> subscribers;
    std::uint64_t published = 0;
    bool closed = false;
  };

  Topic& topic_for(const std::string& name) {
    if (name.empty()) throw InvalidInput("topic name must not be empty");
    std::lock_guard lock(mu_);
    auto& slot = topics_[name];
    if (!slot) slot = std::make_unique<Topic>();
    return *slot;
  }

  std::size_t channel_capacity_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Topic>> topics_;
};

}  // namespace lss::pipeline
