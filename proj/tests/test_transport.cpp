#include <doctest.h>

#include <bit>
#include <limits>

#include "dqgm/engines.hpp"
#include "dqgm/problems.hpp"
#include "dqgm/quantizer.hpp"
#include "dqgm/rng.hpp"
#include "dqgm/transport.hpp"

using namespace dqgm;
using namespace dqgm::transport;

TEST_CASE("iterate frame layout is little-endian") {
  const std::vector<double> v{1.0};
  const Frame f = encode_iterate(0x01020304u, v);
  REQUIRE(f.size() == 12);
  CHECK(f[0] == 0x04);
  CHECK(f[3] == 0x01);
  // 1.0 = 0x3ff0000000000000
  CHECK(f[10] == 0xf0);
  CHECK(f[11] == 0x3f);
}

TEST_CASE("iterate frames reproduce every double exactly") {
  const std::vector<double> v{0.0, -0.0, 1e-310, std::numeric_limits<double>::max(),
                              std::numeric_limits<double>::infinity(), -3.25};
  const auto back = decode_iterate(encode_iterate(7, v), 6);
  CHECK(back.iteration == 7);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(std::bit_cast<std::uint64_t>(back.values(static_cast<Eigen::Index>(i))) ==
          std::bit_cast<std::uint64_t>(v[i]));
  const std::vector<double> nan{std::numeric_limits<double>::quiet_NaN()};
  CHECK(std::isnan(decode_iterate(encode_iterate(0, nan)).values(0)));
}

TEST_CASE("malformed iterate frames are rejected") {
  const std::vector<double> none;
  CHECK_THROWS_AS(encode_iterate(0, none), FramingError);
  const std::vector<double> v{1.0, 2.0};
  Frame f = encode_iterate(0, v);
  CHECK_THROWS_AS(decode_iterate(f, 3), FramingError);
  f.pop_back();
  CHECK_THROWS_AS(decode_iterate(f), FramingError);
  CHECK_THROWS_AS(decode_iterate(Frame{1, 2, 3}), FramingError);
  CHECK_THROWS_AS(decode_iterate(Frame{1, 2, 3, 4}), FramingError);
}

TEST_CASE("payload frames carry the bit count and the packed bits") {
  quant::Payload p;
  p.iteration = 5;
  p.indices = {3, 1};
  p.bits = quant::encode_payload(p.indices, 2);
  const Frame f = encode_payload(p);
  REQUIRE(f.size() == 9);
  CHECK(payload_bits(f) == 4);
  CHECK(f[8] == 0xd0);  // 1101 then padding
  const auto back = decode_payload(f, 4);
  CHECK(back.iteration == 5);
  CHECK(back.bits.to_string() == "1101");
}

TEST_CASE("malformed payload frames are rejected") {
  quant::Payload p;
  p.indices = {1, 2, 3};
  p.bits = quant::encode_payload(p.indices, 3);
  Frame f = encode_payload(p);
  CHECK_THROWS_AS(decode_payload(f, 8), FramingError);
  Frame longer = f;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_payload(longer, 9), FramingError);
  f.pop_back();
  CHECK_THROWS_AS(decode_payload(f, 9), FramingError);
  CHECK_THROWS_AS(payload_bits(Frame{0, 0, 0}), FramingError);
}

TEST_CASE("zero-rate payloads are header only") {
  quant::Payload p;
  p.indices = {0, 0};
  p.bits = quant::encode_payload(p.indices, 0);
  const Frame f = encode_payload(p);
  CHECK(f.size() == 8);
  CHECK(decode_payload(f, 0).bits.size() == 0);
}

TEST_CASE("channel enforces the round protocol") {
  Channel c(2);
  const std::vector<double> v{1.0};
  quant::Payload p;
  p.indices = {1};
  p.bits = quant::encode_payload(p.indices, 3);
  CHECK_THROWS_AS(c.send_payload(0, encode_payload(p)), std::logic_error);
  c.broadcast(encode_iterate(0, v));
  CHECK_THROWS_AS(c.broadcast(encode_iterate(1, v)), std::logic_error);
  CHECK_THROWS_AS(c.send_payload(0, encode_payload(p)), std::logic_error);
  c.receive_iterate(0);
  c.send_payload(0, encode_payload(p));
  CHECK_THROWS_AS(c.send_payload(0, encode_payload(p)), std::logic_error);
  CHECK_THROWS_AS(c.receive_payload(1), std::logic_error);
  CHECK_THROWS_AS(c.receive_iterate(5), std::out_of_range);
  CHECK_THROWS_AS(Channel(0), std::invalid_argument);
}

TEST_CASE("channel trace totals equal the sum of the per-round records") {
  const auto f = problems::make_gaussian_ls(24, 8, 5.0, 1);
  const auto config = engines::make_dq_config(engines::DqScheme::gd, f.smoothness, f.convexity,
                                              f.distance, quant::QuantizerSpec(8, 5));
  engines::DqSession<double, problems::Objective<double>> s(f, f.start, config);
  for (int t = 0; t < 25; ++t) s.step();
  const auto trace = trace_report(s.channel());
  REQUIRE(trace.records.size() == 25);
  CHECK(trace.uplink_bits == 25 * 8 * 5);
  CHECK(trace.worker_bits == std::vector<std::size_t>{1000});
  CHECK(trace.downlink_bytes == 25 * (4 + 8 * 8));
  for (std::uint32_t t = 0; t < 25; ++t) CHECK(trace.records[t].iteration == t);
}

TEST_CASE("multi-worker rounds record bits per worker") {
  problems::InterpolationOptions opts;
  opts.smoothness = {4.0, 1.0};
  const auto p = problems::make_interpolation_problem(2, 4, 6, {2.0, 2.0}, 3, opts);
  std::vector<quant::QuantizerSpec> specs{quant::QuantizerSpec(4, 6), quant::QuantizerSpec(4, 2)};
  const auto config = engines::make_nq_config(opts.smoothness, p.smoothness(), p.convexity(),
                                              p.distance, specs);
  using W = problems::WorkerObjective<double>;
  engines::NqSession<double, W> s({&p.workers[0], &p.workers[1]}, p.start, config);
  for (int t = 0; t < 10; ++t) s.step();
  const auto trace = trace_report(s.channel());
  CHECK(trace.worker_bits == std::vector<std::size_t>{240, 80});
  CHECK(trace.uplink_bits == 320);
  CHECK(trace.downlink_bytes == 10 * 2 * (4 + 32));
}

TEST_CASE("a stale iteration counter is a framing error") {
  const auto f = problems::make_gaussian_ls(12, 4, 3.0, 2);
  const auto config = engines::make_dq_config(engines::DqScheme::gd, f.smoothness, f.convexity,
                                              f.distance, quant::QuantizerSpec(4, 5));
  engines::DqWorker<double, problems::Objective<double>> worker(f, config);
  engines::DqServer<double> server(f.start, config);
  const Frame first = worker.respond(server.broadcast());
  server.receive(first);
  CHECK_THROWS_AS(server.receive(first), FramingError);
  CHECK_THROWS_AS(worker.respond(encode_iterate(0, std::vector<double>(4, 0.0))), FramingError);
}
