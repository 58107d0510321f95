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

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "lss/bench/trace.hpp"
#include "lss/pipeline/bus.hpp"
#include "lss/pipeline/envelope.hpp"
#include "lss/pipeline/ingest.hpp"
#include "lss/pipeline/query.hpp"
#include "lss/pipeline/runner.hpp"
#include "lss/pipeline/sketching.hpp"
#include "lss/pipeline/store.hpp"
#include "support.hpp"

namespace lss::pipeline {
namespace {

using lss::testing::model_with_centers;
using lss::testing::TempDir;

FlowKey key(std::uint64_t id) { return FlowKey::from_id(id); }

Packet pkt(std::uint64_t id, std::uint64_t size = 100, std::int64_t ts = 0) { return {key(id), size, ts}; }

std::map<FlowKey, std::uint64_t> as_map(const FlowletBatch& b) {
  std::map<FlowKey, std::uint64_t> m;
  for (const auto& r : b.records) m[r.key] += r.value;
  return m;
}

TEST(Ingestion, AccumulatesUntilFull) {
  IngestionStage st("s", 2);
  EXPECT_FALSE(st.ingest(pkt(1)));
  EXPECT_FALSE(st.ingest(pkt(1)));
  EXPECT_FALSE(st.ingest(pkt(2)));
  EXPECT_EQ(st.buffered(), 2u);

  const auto b = st.ingest(pkt(3));
  ASSERT_TRUE(b.has_value());
  EXPECT_EQ(as_map(*b), (std::map<FlowKey, std::uint64_t>{{key(1), 200}, {key(2), 100}}));
  EXPECT_EQ(st.buffered(), 1u);
  EXPECT_EQ(as_map(st.flush(0)), (std::map<FlowKey, std::uint64_t>{{key(3), 100}}));
}

TEST(Ingestion, SingleFlowNeverEmitsOnItsOwn) {
  IngestionStage st("s", 4);
  for (int i = 0; i < 10000; ++i) EXPECT_FALSE(st.ingest(pkt(7, 1)));
  EXPECT_EQ(as_map(st.flush(0)), (std::map<FlowKey, std::uint64_t>{{key(7), 10000}}));
}

TEST(Ingestion, FlushSemantics) {
  IngestionStage st("s", 4);
  const auto first = st.flush(1);
  EXPECT_TRUE(first.records.empty());
  st.ingest(pkt(1));
  st.ingest(pkt(1));
  EXPECT_EQ(as_map(st.flush(2)), (std::map<FlowKey, std::uint64_t>{{key(1), 200}}));
  const auto again = st.flush(3);
  EXPECT_TRUE(again.records.empty());
  EXPECT_GT(again.sequence, first.sequence);
  EXPECT_THROW(st.ingest(pkt(1, 0)), InvalidInput);
}

TEST(Ingestion, BatchesConserveBytesAndHaveDistinctKeys) {
  IngestionStage st("s", 37);
  std::mt19937_64 rng(6);
  std::uint64_t in = 0;
  std::uint64_t out = 0;
  std::uint64_t last_seq = 0;
  bool first = true;
  auto take = [&](const FlowletBatch& b) {
    std::set<FlowKey> seen;
    for (const auto& r : b.records) {
      EXPECT_TRUE(seen.insert(r.key).second);
      out += r.value;
    }
    if (!first) {
      EXPECT_GT(b.sequence, last_seq);
    }
    first = false;
    last_seq = b.sequence;
  };
  for (int i = 0; i < 20000; ++i) {
    const auto p = pkt(rng() % 300, 1 + rng() % 1500);
    in += p.size_bytes;
    if (auto b = st.ingest(p)) take(*b);
  }
  take(st.flush(0));
  EXPECT_EQ(in, out);
}

TEST(Ingestion, BatchWireRoundTrip) {
  FlowletBatch b{"ingest-3", 17, 123456, {{key(1), 5}, {key(99), 1ULL << 40}}};
  const auto back = decode_batch(encode_batch(b));
  EXPECT_EQ(back.source_id, b.source_id);
  EXPECT_EQ(back.sequence, b.sequence);
  EXPECT_EQ(back.emitted_at_ns, b.emitted_at_ns);
  EXPECT_EQ(back.records, b.records);
  auto bytes = encode_batch(b);
  bytes.pop_back();
  EXPECT_THROW(decode_batch(bytes), DecodeError);
}

Message msg(std::string producer, std::uint64_t seq) {
  return Message{std::move(producer), seq, std::make_shared<const wire::Bytes>()};
}

TEST(Bus, FifoAndFanOut) {
  TopicBus bus(8);
  auto a = bus.subscribe("t");
  auto b = bus.subscribe("t");
  bus.publish("t", msg("p", 1));
  bus.publish("t", msg("p", 2));
  for (auto& sub : {a, b}) {
    EXPECT_EQ(sub->pop()->sequence, 1u);
    EXPECT_EQ(sub->pop()->sequence, 2u);
  }
}

TEST(Bus, LateSubscriberSeesOnlyLaterMessages) {
  TopicBus bus(8);
  auto early = bus.subscribe("t");
  bus.publish("t", msg("p", 1));
  auto late = bus.subscribe("t");
  bus.publish("t", msg("p", 2));
  bus.close("t");
  EXPECT_EQ(late->pop()->sequence, 2u);
  EXPECT_FALSE(late->pop().has_value());
  EXPECT_EQ(early->pop()->sequence, 1u);
}

TEST(Bus, RejectsEmptyTopicAndClosedPublish) {
  TopicBus bus(8);
  EXPECT_THROW(bus.subscribe(""), InvalidInput);
  EXPECT_THROW(bus.publish("", msg("p", 0)), InvalidInput);
  bus.close("t");
  EXPECT_THROW(bus.publish("t", msg("p", 0)), InvalidInput);
}

TEST(Bus, ManyProducersKeepPerProducerOrder) {
  TopicBus bus(64);  // small channels force backpressure
  auto sub = bus.subscribe("t");
  constexpr int kProducers = 4;
  constexpr std::uint64_t kEach = 25000;
  std::vector<std::thread> ps;
  for (int p = 0; p < kProducers; ++p) {
    ps.emplace_back([&, p] {
      for (std::uint64_t s = 0; s < kEach; ++s) bus.publish("t", msg("p" + std::to_string(p), s));
    });
  }
  std::map<std::string, std::uint64_t> next;
  std::uint64_t received = 0;
  std::uint64_t violations = 0;
  std::thread consumer([&] {
    while (auto m = sub->pop()) {
      auto& n = next[m->producer];
      if (m->sequence != n) ++violations;
      n = m->sequence + 1;
      ++received;
    }
  });
  for (auto& t : ps) t.join();
  bus.close("t");
  consumer.join();
  EXPECT_EQ(received, kProducers * kEach);
  EXPECT_EQ(violations, 0u);
  EXPECT_EQ(bus.published("t"), kProducers * kEach);
}

SketchingStage stage(WindowConfig w, std::uint32_t m = 50) {
  SketchingStage s("src", model_with_centers({10, 100}), m, w);
  s.set_logger([](const std::string&) {});
  return s;
}

TEST(Sketching, ClosesAfterNDistinctFlows) {
  auto s = stage(WindowConfig::flows(3));
  EXPECT_TRUE(s.feed({key(1), 5}, 1).empty());
  EXPECT_TRUE(s.feed({key(2), 5}, 2).empty());
  const auto out = s.feed({key(3), 5}, 3);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].decode_sketch().cardinality(), 3u);
  EXPECT_EQ(s.current().cardinality(), 0u);
  EXPECT_FALSE(s.flush().has_value());
}

TEST(Sketching, FragmentsOfOneFlowDoNotCloseTheWindow) {
  auto s = stage(WindowConfig::flows(3));
  for (int i = 0; i < 10; ++i) EXPECT_TRUE(s.feed({key(1), 4}, i).empty());
  const auto e = s.flush();
  ASSERT_TRUE(e.has_value());
  const auto sk = e->decode_sketch();
  EXPECT_EQ(sk.cardinality(), 1u);
  EXPECT_DOUBLE_EQ(sk.query(key(1)), 40.0);
}

TEST(Sketching, TimeWindowClosesAtFirstRecordPastBoundary) {
  constexpr std::int64_t kSec = 1'000'000'000;
  auto s = stage(WindowConfig::time(kSec));
  for (int i = 1; i <= 9; ++i) EXPECT_TRUE(s.feed({key(static_cast<std::uint64_t>(i)), 1}, i * kSec / 10).empty());
  const auto out = s.feed({key(100), 1}, 12 * kSec / 10);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].window_start_ns, 0);
  EXPECT_EQ(out[0].window_end_ns, kSec);
  EXPECT_EQ(out[0].decode_sketch().cardinality(), 9u);
  const auto rest = s.flush();
  ASSERT_TRUE(rest.has_value());
  EXPECT_EQ(rest->window_start_ns, kSec);
  EXPECT_EQ(rest->window_end_ns, 2 * kSec);
  EXPECT_GT(rest->window_id, out[0].window_id);
}

TEST(Sketching, RotatesEarlyWhenMembershipIsFull) {
  SketchOptions so;
  so.expected_flows = 8;  // 16 slots: at most 15 flows per window
  SketchingStage s("src", model_with_centers({10, 100}), 8, WindowConfig::flows(1000), so);
  std::vector<std::string> logs;
  s.set_logger([&](const std::string& m) { logs.push_back(m); });
  std::vector<SketchEnvelope> env;
  for (std::uint64_t i = 0; i < 100; ++i) {
    for (auto& e : s.feed({key(i), 3}, static_cast<std::int64_t>(i))) env.push_back(std::move(e));
  }
  if (auto e = s.flush()) env.push_back(std::move(*e));
  EXPECT_GT(s.early_rotations(), 0u);
  EXPECT_EQ(logs.size(), s.early_rotations());
  std::uint64_t flows = 0;
  std::uint64_t total = 0;
  for (const auto& e : env) {
    const auto sk = e.decode_sketch();
    flows += sk.cardinality();
    total += sk.total_value();
  }
  EXPECT_EQ(flows, 100u);
  EXPECT_EQ(total, 300u);
}

SketchEnvelope sample_envelope(std::uint64_t id, std::int64_t arrival, std::vector<std::pair<std::uint64_t, std::uint64_t>> flows,
                               std::string source = "src") {
  LssSketch sk(model_with_centers({10, 100}), 200);
  for (auto [k, v] : flows) sk.insert(key(k), v);
  sk.close();
  SketchEnvelope e;
  e.source_topic = std::move(source);
  e.window_id = id;
  e.window_start_ns = static_cast<std::int64_t>(id) * 10;
  e.window_end_ns = static_cast<std::int64_t>(id) * 10 + 10;
  e.arrival_ns = arrival;
  e.sketch = sk.serialize();
  return e;
}

TEST(Envelope, WireAndFrameRoundTrip) {
  const auto e = sample_envelope(4, 77, {{1, 5}, {2, 50}});
  EXPECT_EQ(decode_envelope(encode_envelope(e)), e);

  std::stringstream ss;
  const auto a = encode_envelope(e);
  const auto b = encode_envelope(sample_envelope(5, 78, {{3, 1}}));
  write_frame(ss, a);
  write_frame(ss, b);
  EXPECT_EQ(read_frame(ss), a);
  EXPECT_EQ(read_frame(ss), b);
  EXPECT_FALSE(read_frame(ss).has_value());

  auto bad = encode_envelope(e);
  bad[bad.size() - 3] ^= 0x5A;
  bad.resize(bad.size() - 1);
  EXPECT_THROW(decode_envelope(bad), DecodeError);
}

TEST(Store, RangeAndPersistence) {
  TempDir dir("store");
  {
    SketchStore st(dir.path());
    st.put(sample_envelope(0, 100, {{1, 5}}));
    st.put(sample_envelope(1, 200, {{2, 5}}));
    st.put(sample_envelope(2, 300, {{3, 5}}));
    const auto hits = st.range(150, 300);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].window_id, 1u);
    EXPECT_EQ(hits[1].window_id, 2u);
    EXPECT_TRUE(st.range(400, 500).empty());
    EXPECT_THROW(st.range(5, 1), InvalidInput);
  }
  SketchStore reopened(dir.path());
  EXPECT_EQ(reopened.size(), 3u);
  const auto all = reopened.range(0, 1000);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[2], sample_envelope(2, 300, {{3, 5}}));
}

TEST(Store, CorruptEnvelopeIsSkippedWithWarning) {
  TempDir dir("corrupt");
  SketchStore st(dir.path());
  st.put(sample_envelope(0, 100, {{1, 5}}));
  st.put(sample_envelope(1, 200, {{2, 5}}));
  {
    std::ofstream out(dir.path() / SketchStore::file_name("src", 0), std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  std::vector<std::string> warnings;
  st.set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
  const auto hits = st.range(0, 1000);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].window_id, 1u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Query, SingleEnvelopeMatchesDirectCalls) {
  const auto e = sample_envelope(0, 1, {{1, 5}, {2, 90}, {3, 100}});
  const auto sk = e.decode_sketch();
  QueryParams p;
  p.keys = {key(1), key(2), key(3)};
  p.threshold = 50;
  const auto fs = network_wide_query({e}, QueryTask::flow_size, p);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(fs["flows"][i]["estimates"][0]["estimate"].get<double>(), sk.query(p.keys[i]));
  }
  const auto ent = network_wide_query({e}, QueryTask::entropy, p);
  EXPECT_DOUBLE_EQ(ent["per_window"][0]["entropy"].get<double>(), sk.entropy(p.keys));
  const auto hh = network_wide_query({e}, QueryTask::heavy_hitters, p);
  EXPECT_EQ(hh["heavy_hitters"].size(), sk.heavy_hitters(p.keys, 50).size());
  const auto card = network_wide_query({e}, QueryTask::cardinality, p);
  EXPECT_EQ(card["total"].get<std::uint64_t>(), 3u);
}

TEST(Query, CardinalitySumsAndHeavyHittersUnion) {
  const auto a = sample_envelope(0, 1, {{1, 100}, {2, 1}});
  const auto b = sample_envelope(1, 2, {{1, 100}, {3, 1}, {4, 2}});
  QueryParams p;
  p.keys = {key(1), key(2), key(3), key(4)};
  p.threshold = 50;
  EXPECT_EQ(network_wide_query({a, b}, QueryTask::cardinality, p)["total"].get<std::uint64_t>(), 5u);
  const auto hh = network_wide_query({a, b}, QueryTask::heavy_hitters, p)["heavy_hitters"];
  ASSERT_EQ(hh.size(), 1u);
  EXPECT_EQ(hh[0]["key"], format_key(key(1)));
  EXPECT_EQ(hh[0]["estimates"].size(), 2u);

  const auto ch = network_wide_query({a, b}, QueryTask::heavy_changes, p)["pairs"];
  ASSERT_EQ(ch.size(), 1u);
  EXPECT_TRUE(ch[0]["changed"].empty());
  p.threshold = 0.5;
  EXPECT_EQ(network_wide_query({a, b}, QueryTask::heavy_changes, p)["pairs"][0]["changed"].size(), 3u);
}

TEST(Query, TaskNames) {
  for (auto t : {QueryTask::flow_size, QueryTask::entropy, QueryTask::heavy_hitters, QueryTask::cardinality,
                 QueryTask::heavy_changes}) {
    EXPECT_EQ(parse_task(task_name(t)), t);
  }
  EXPECT_THROW(parse_task("top-k"), InvalidInput);
  QueryParams none;
  EXPECT_THROW(network_wide_query({}, QueryTask::flow_size, none), InvalidInput);
}

TEST(Runner, EndToEndConservesBytes) {
  bench::GenOptions g;
  g.n_flows = 3000;
  g.mean_packets = 10;
  const auto packets = bench::generate_trace(g);
  std::vector<double> samples;
  for (std::size_t i = 0; i < 200; ++i) samples.push_back(static_cast<double>(1000 * (1 + i % 50)));
  TrainOptions o;
  o.k = 8;
  const auto model = train_model(samples, o);

  TempDir dir("runner");
  SketchStore store(dir.path());
  PipelineConfig cfg;
  cfg.window = WindowConfig::flows(500);
  cfg.m = 100;
  cfg.ingest_capacity = 50;
  std::int64_t tick = 0;
  cfg.clock = [&tick] { return ++tick; };
  const auto stats = run_pipeline(packets, model, cfg, store);

  std::uint64_t bytes = 0;
  for (const auto& p : packets) bytes += p.size_bytes;
  std::uint64_t stored = 0;
  for (const auto& e : store.all()) stored += e.decode_sketch().total_value();
  EXPECT_EQ(stats.packets, packets.size());
  EXPECT_EQ(stats.packet_bytes, bytes);
  EXPECT_EQ(stored, bytes);
  EXPECT_EQ(stats.fifo_violations, 0u);
  EXPECT_EQ(stats.envelopes, store.size());
}

}  // namespace
}  // namespace lss::pipeline
