#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dqgm/quantizer.hpp"

namespace dqgm::transport {

using Frame = std::vector<std::uint8_t>;

class FramingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Downlink frame: u32 iteration, then n binary64 values, all little-endian.
Frame encode_iterate(std::uint32_t iteration, std::span<const double> values);

template <typename Derived>
Frame encode_iterate(std::uint32_t iteration, const Eigen::MatrixBase<Derived>& x) {
  std::vector<double> values(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i)
    values[static_cast<std::size_t>(i)] = static_cast<double>(x(i));
  return encode_iterate(iteration, values);
}

struct IterateFrame {
  std::uint32_t iteration = 0;
  Eigen::VectorXd values;
};

/// Expects exactly `dimension` values when dimension > 0; any positive
/// multiple of 8 payload bytes otherwise.
IterateFrame decode_iterate(std::span<const std::uint8_t> frame, Eigen::Index dimension = 0);

/// Uplink frame: u32 iteration, u32 payload bit count, then the packed bits.
Frame encode_payload(const quant::Payload& payload);

struct PayloadFrame {
  std::uint32_t iteration = 0;
  quant::BitString bits;
};

/// Rejects frames whose bit count differs from `expected_bits` or whose byte
/// length does not match the declared bit count.
PayloadFrame decode_payload(std::span<const std::uint8_t> frame, std::size_t expected_bits);

/// Payload bit count declared in an uplink frame header.
std::size_t payload_bits(std::span<const std::uint8_t> frame);

struct ChannelRecord {
  std::uint32_t iteration = 0;
  std::size_t downlink_bytes = 0;
  std::size_t uplink_bits = 0;
  std::vector<std::size_t> worker_bits;
};

struct ChannelTrace {
  std::vector<ChannelRecord> records;
  std::size_t downlink_bytes = 0;
  std::size_t uplink_bits = 0;
  std::vector<std::size_t> worker_bits;
};

/// In-memory half-duplex channel between one server and K workers. Each
/// round the server broadcasts one iterate frame, then every worker returns
/// one payload frame.
class Channel {
 public:
  explicit Channel(std::size_t workers = 1);

  std::size_t workers() const { return downlink_.size(); }

  void broadcast(Frame frame);
  Frame receive_iterate(std::size_t worker);
  void send_payload(std::size_t worker, Frame frame);
  Frame receive_payload(std::size_t worker);

  const std::vector<ChannelRecord>& records() const { return records_; }

 private:
  bool idle() const;

  std::vector<std::deque<Frame>> downlink_;
  std::vector<std::deque<Frame>> uplink_;
  std::vector<ChannelRecord> records_;
};

ChannelTrace trace_report(const Channel& channel);
ChannelTrace trace_report(std::span<const ChannelRecord> records, std::size_t workers);

}  // namespace dqgm::transport
