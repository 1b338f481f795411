#include "dqgm/transport.hpp"

#include <bit>
#include <string>

namespace dqgm::transport {
namespace {

void put_u32(Frame& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u64(Frame& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | in[at + static_cast<std::size_t>(b)];
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | in[at + static_cast<std::size_t>(b)];
  return v;
}

}  // namespace

Frame encode_iterate(std::uint32_t iteration, std::span<const double> values) {
  if (values.empty()) throw FramingError("iterate frame must carry at least one value");
  Frame out;
  out.reserve(4 + 8 * values.size());
  put_u32(out, iteration);
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

IterateFrame decode_iterate(std::span<const std::uint8_t> frame, Eigen::Index dimension) {
  if (frame.size() < 4) throw FramingError("iterate frame shorter than its header");
  const std::size_t body = frame.size() - 4;
  if (body == 0) throw FramingError("iterate frame carries no values");
  if (body % 8 != 0) throw FramingError("iterate frame truncated inside a value");
  const auto n = static_cast<Eigen::Index>(body / 8);
  if (dimension > 0 && n != dimension)
    throw FramingError("iterate frame carries " + std::to_string(n) + " values, expected " +
                       std::to_string(dimension));
  IterateFrame f;
  f.iteration = get_u32(frame, 0);
  f.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    f.values(i) = std::bit_cast<double>(get_u64(frame, 4 + 8 * static_cast<std::size_t>(i)));
  return f;
}

Frame encode_payload(const quant::Payload& payload) {
  const auto bits = payload.bits.size();
  if (bits > 0xffffffffULL) throw FramingError("payload too long for its length field");
  Frame out;
  out.reserve(8 + payload.bits.bytes().size());
  put_u32(out, payload.iteration);
  put_u32(out, static_cast<std::uint32_t>(bits));
  out.insert(out.end(), payload.bits.bytes().begin(), payload.bits.bytes().end());
  return out;
}

std::size_t payload_bits(std::span<const std::uint8_t> frame) {
  if (frame.size() < 8) throw FramingError("payload frame shorter than its header");
  return get_u32(frame, 4);
}

PayloadFrame decode_payload(std::span<const std::uint8_t> frame, std::size_t expected_bits) {
  const std::size_t bits = payload_bits(frame);
  if (bits != expected_bits)
    throw FramingError("payload declares " + std::to_string(bits) + " bits, expected " +
                       std::to_string(expected_bits));
  if (frame.size() - 8 != (bits + 7) / 8)
    throw FramingError("payload byte length does not match its declared bit count");
  PayloadFrame f;
  f.iteration = get_u32(frame, 0);
  f.bits = quant::BitString(std::vector<std::uint8_t>(frame.begin() + 8, frame.end()), bits);
  return f;
}

Channel::Channel(std::size_t workers) : downlink_(workers), uplink_(workers) {
  if (workers < 1) throw std::invalid_argument("channel needs at least one worker");
}

bool Channel::idle() const {
  for (const auto& q : downlink_)
    if (!q.empty()) return false;
  for (const auto& q : uplink_)
    if (!q.empty()) return false;
  return true;
}

void Channel::broadcast(Frame frame) {
  if (!idle()) throw std::logic_error("broadcast before the previous round completed");
  if (frame.size() < 4) throw FramingError("iterate frame shorter than its header");
  ChannelRecord rec;
  rec.iteration = get_u32(frame, 0);
  rec.downlink_bytes = frame.size() * workers();
  rec.worker_bits.assign(workers(), 0);
  records_.push_back(std::move(rec));
  for (auto& q : downlink_) q.push_back(frame);
}

Frame Channel::receive_iterate(std::size_t worker) {
  auto& q = downlink_.at(worker);
  if (q.empty()) throw std::logic_error("no iterate pending for worker " + std::to_string(worker));
  Frame f = std::move(q.front());
  q.pop_front();
  return f;
}

void Channel::send_payload(std::size_t worker, Frame frame) {
  auto& q = uplink_.at(worker);
  if (records_.empty()) throw std::logic_error("payload sent before any iterate");
  if (!downlink_[worker].empty()) throw std::logic_error("payload sent before reading the iterate");
  if (!q.empty()) throw std::logic_error("worker already sent a payload this round");
  const std::size_t bits = payload_bits(frame);
  auto& rec = records_.back();
  rec.worker_bits[worker] += bits;
  rec.uplink_bits += bits;
  q.push_back(std::move(frame));
}

Frame Channel::receive_payload(std::size_t worker) {
  auto& q = uplink_.at(worker);
  if (q.empty()) throw std::logic_error("no payload pending from worker " + std::to_string(worker));
  Frame f = std::move(q.front());
  q.pop_front();
  return f;
}

ChannelTrace trace_report(std::span<const ChannelRecord> records, std::size_t workers) {
  ChannelTrace t;
  t.records.assign(records.begin(), records.end());
  t.worker_bits.assign(workers, 0);
  for (const auto& r : records) {
    t.downlink_bytes += r.downlink_bytes;
    t.uplink_bits += r.uplink_bits;
    for (std::size_t k = 0; k < workers && k < r.worker_bits.size(); ++k)
      t.worker_bits[k] += r.worker_bits[k];
  }
  return t;
}

ChannelTrace trace_report(const Channel& channel) {
  return trace_report(channel.records(), channel.workers());
}

}  // namespace dqgm::transport
