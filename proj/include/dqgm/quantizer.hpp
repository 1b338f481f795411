#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dqgm::quant {

enum class QuantizerKind {
  /// Independent uniform quantization of each coordinate of the cube [-1, 1]^n
  /// into 2^R centered cells.
  scalar_uniform,
  /// Rate-infinity surrogate: each coordinate is sent as its raw IEEE-754
  /// binary64 pattern (R = 64), so the reconstruction error is exactly zero.
  lossless,
};

/// Input fell outside the quantizer's domain. Under a correct dynamic-range
/// schedule this never happens.
class RangeViolation : public std::runtime_error {
 public:
  RangeViolation(Eigen::Index coordinate, double value, double range)
      : std::runtime_error("quantizer input coordinate " + std::to_string(coordinate) +
                           " = " + std::to_string(value) + " outside [-" +
                           std::to_string(range) + ", " + std::to_string(range) + "]"),
        coordinate_(coordinate),
        value_(value),
        range_(range) {}

  Eigen::Index coordinate() const { return coordinate_; }
  double value() const { return value_; }
  double range() const { return range_; }

 private:
  Eigen::Index coordinate_;
  double value_;
  double range_;
};

class EncodingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Relative slack on the domain test; absorbs rounding in schedules that are
/// tight by construction.
inline constexpr double kDomainSlack = 1e-12;

/// Largest per-dimension rate for which cell indices stay exact in binary64.
inline constexpr int kMaxScalarRate = 52;

/// A dimension-n, rate-R quantizer with dynamic range 1.
class QuantizerSpec {
 public:
  QuantizerSpec(Eigen::Index dimension, int rate,
                QuantizerKind kind = QuantizerKind::scalar_uniform)
      : dimension_(dimension), rate_(rate), kind_(kind) {
    if (dimension < 1) throw std::invalid_argument("quantizer dimension must be >= 1");
    if (kind == QuantizerKind::lossless) {
      rate_ = 64;
    } else if (rate < 0 || rate > kMaxScalarRate) {
      throw std::invalid_argument("scalar quantizer rate must lie in [0, 52], got " +
                                  std::to_string(rate));
    }
  }

  static QuantizerSpec lossless(Eigen::Index dimension) {
    return QuantizerSpec(dimension, 64, QuantizerKind::lossless);
  }

  Eigen::Index dimension() const { return dimension_; }
  int rate() const { return rate_; }
  QuantizerKind kind() const { return kind_; }

  /// Bits carried by one message: n * R.
  std::size_t message_bits() const {
    return static_cast<std::size_t>(dimension_) * static_cast<std::size_t>(rate_);
  }

  /// log2 |Im(q)| = nR.
  double log2_image_size() const { return static_cast<double>(message_bits()); }

  /// Levels per coordinate (2^R). Only meaningful for scalar_uniform.
  std::uint64_t levels() const { return std::uint64_t{1} << rate_; }

  /// Covering efficiency |Im(q)|^{1/n} d(q) / r(q). For the scalar uniform
  /// quantizer 2^R * (sqrt(n) 2^-R) / 1 = sqrt(n). The lossless surrogate has
  /// zero covering radius and reports 0.
  double covering_efficiency() const {
    if (kind_ == QuantizerKind::lossless) return 0.0;
    return std::sqrt(static_cast<double>(dimension_));
  }

  /// Covering radius at unit dynamic range, rho_n 2^-R. This is the gain by
  /// which every dynamic-range schedule feeds past errors forward.
  double unit_covering_radius() const {
    if (kind_ == QuantizerKind::lossless) return 0.0;
    return std::ldexp(std::sqrt(static_cast<double>(dimension_)), -rate_);
  }

  /// Covering radius of the quantizer scaled to dynamic range r.
  double covering_radius(double r) const {
    if (!(r >= 0.0)) throw std::invalid_argument("dynamic range must be nonnegative");
    return r * unit_covering_radius();
  }

  friend bool operator==(const QuantizerSpec&, const QuantizerSpec&) = default;

 private:
  Eigen::Index dimension_;
  int rate_;
  QuantizerKind kind_;
};

/// Packed bit string, most significant bit first within each byte.
class BitString {
 public:
  BitString() = default;

  explicit BitString(std::size_t size) : bytes_((size + 7) / 8, 0), size_(size) {}

  BitString(std::vector<std::uint8_t> bytes, std::size_t size)
      : bytes_(std::move(bytes)), size_(size) {
    if (bytes_.size() != (size + 7) / 8)
      throw EncodingError("bit string byte count does not match its bit length");
  }

  static BitString from_string(const std::string& text) {
    BitString b(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        b.set(i, true);
      } else if (text[i] != '0') {
        throw EncodingError("bit string literal may contain only '0' and '1'");
      }
    }
    return b;
  }

  std::size_t size() const { return size_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  bool operator[](std::size_t i) const { return (bytes_[i / 8] >> (7 - i % 8)) & 1U; }

  void set(std::size_t i, bool value) {
    const auto mask = static_cast<std::uint8_t>(1U << (7 - i % 8));
    if (value) {
      bytes_[i / 8] |= mask;
    } else {
      bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
    }
  }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
      if ((*this)[i]) s[i] = '1';
    return s;
  }

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t size_ = 0;
};

/// Packs indices coordinate-major, each as `rate` bits MSB first.
inline BitString encode_payload(std::span<const std::uint64_t> indices, int rate) {
  if (rate < 0 || rate > 64) throw EncodingError("rate must lie in [0, 64]");
  BitString bits(indices.size() * static_cast<std::size_t>(rate));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::uint64_t index = indices[k];
    if (rate < 64 && index >> rate != 0)
      throw EncodingError("index " + std::to_string(index) + " at coordinate " +
                          std::to_string(k) + " does not fit in " + std::to_string(rate) +
                          " bits");
    for (int b = rate - 1; b >= 0; --b) bits.set(pos++, (index >> b) & 1U);
  }
  return bits;
}

inline std::vector<std::uint64_t> decode_payload(const BitString& bits, Eigen::Index dimension,
                                                 int rate) {
  if (rate < 0 || rate > 64) throw EncodingError("rate must lie in [0, 64]");
  const auto n = static_cast<std::size_t>(dimension);
  if (bits.size() != n * static_cast<std::size_t>(rate))
    throw EncodingError("payload carries " + std::to_string(bits.size()) + " bits, expected " +
                        std::to_string(n * static_cast<std::size_t>(rate)));
  std::vector<std::uint64_t> indices(n, 0);
  std::size_t pos = 0;
  for (auto& index : indices)
    for (int b = 0; b < rate; ++b) index = (index << 1) | (bits[pos++] ? 1U : 0U);
  return indices;
}

struct Payload {
  std::uint32_t iteration = 0;
  std::vector<std::uint64_t> indices;
  BitString bits;

  friend bool operator==(const Payload&, const Payload&) = default;
};

/// What to do with an input outside the cube [-r, r]^n.
enum class Overload {
  reject,    ///< throw RangeViolation
  saturate,  ///< clamp each coordinate into the cube
};

template <typename Scalar>
struct Quantized {
  Payload payload;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reconstruction;
  bool saturated = false;
};

/// q_t(.) = r_t q(. / r_t): the base quantizer stretched to dynamic range r.
template <typename Scalar>
class ScaledQuantizer {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ScaledQuantizer(QuantizerSpec base, Scalar range) : base_(base), range_(range) {
    if (!(range >= Scalar(0)) || !std::isfinite(static_cast<double>(range)))
      throw std::invalid_argument("dynamic range must be finite and nonnegative");
  }

  const QuantizerSpec& base() const { return base_; }
  Scalar range() const { return range_; }

  Scalar covering_radius() const {
    return static_cast<Scalar>(base_.covering_radius(static_cast<double>(range_)));
  }

  Quantized<Scalar> quantize(const Eigen::Ref<const Vector>& u, std::uint32_t iteration = 0,
                             Overload overload = Overload::reject) const {
    if (u.size() != base_.dimension())
      throw std::invalid_argument("quantizer input has wrong dimension");
    Quantized<Scalar> out;
    out.payload.iteration = iteration;
    out.payload.indices.resize(static_cast<std::size_t>(u.size()));
    if (base_.kind() == QuantizerKind::lossless) {
      for (Eigen::Index i = 0; i < u.size(); ++i)
        out.payload.indices[static_cast<std::size_t>(i)] =
            std::bit_cast<std::uint64_t>(static_cast<double>(u(i)));
    } else {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double v = cell_coordinate(u, i, overload, out.saturated);
        out.payload.indices[static_cast<std::size_t>(i)] = cell_index(v);
      }
    }
    out.payload.bits = encode_payload(out.payload.indices, base_.rate());
    out.reconstruction = reconstruct(out.payload.indices);
    return out;
  }

  /// Server-side decoding: indices to reconstruction points.
  Vector reconstruct(std::span<const std::uint64_t> indices) const {
    if (static_cast<Eigen::Index>(indices.size()) != base_.dimension())
      throw std::invalid_argument("index count does not match quantizer dimension");
    Vector q(base_.dimension());
    if (base_.kind() == QuantizerKind::lossless) {
      for (Eigen::Index i = 0; i < q.size(); ++i)
        q(i) = static_cast<Scalar>(std::bit_cast<double>(indices[static_cast<std::size_t>(i)]));
      return q;
    }
    const double width = std::ldexp(2.0, -base_.rate());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const auto index = indices[static_cast<std::size_t>(i)];
      if (index >= base_.levels()) throw EncodingError("cell index out of range");
      const double level = -1.0 + (static_cast<double>(index) + 0.5) * width;
      q(i) = range_ * static_cast<Scalar>(level);
    }
    return q;
  }

 private:
  // u_i / r, validated against the unit cube.
  double cell_coordinate(const Eigen::Ref<const Vector>& u, Eigen::Index i, Overload overload,
                         bool& saturated) const {
    const double ui = static_cast<double>(u(i));
    const double r = static_cast<double>(range_);
    if (std::isnan(ui)) throw RangeViolation(i, ui, r);
    if (r == 0.0) {
      if (ui == 0.0) return 0.0;
      if (overload == Overload::reject) throw RangeViolation(i, ui, r);
      saturated = true;
      return ui > 0.0 ? 1.0 : -1.0;
    }
    const double v = ui / r;
    if (std::abs(v) > 1.0 + kDomainSlack) {
      if (overload == Overload::reject) throw RangeViolation(i, ui, r);
      saturated = true;
      return v > 0.0 ? 1.0 : -1.0;
    }
    return v;
  }

  // Cells [-1 + k w, -1 + (k+1) w) with w = 2^{1-R}; a value on a boundary
  // belongs to the upper cell and v = 1 to the top cell.
  std::uint64_t cell_index(double v) const {
    const double position = std::floor((v + 1.0) * std::ldexp(1.0, base_.rate() - 1));
    const double top = static_cast<double>(base_.levels() - 1);
    if (!(position > 0.0)) return 0;
    if (position >= top) return base_.levels() - 1;
    return static_cast<std::uint64_t>(position);
  }

  QuantizerSpec base_;
  Scalar range_;
};

}  // namespace dqgm::quant
