#pragma once

// Denoiser wire protocol. All integers and floats are little-endian.
//
//   handshake (both directions): "ZDNZ" u32 version
//   request:  u32 version, u64 id, u32 level, u32 t, u8 conditional,
//             u32 prompt_len, prompt bytes (UTF-8), u32 H, u32 W, u32 C,
//             H*W*C f32 (row-major, channel-last)
//   response: u64 id, u8 status,
//             status == 0: H*W*C f32 (dims of the matching request)
//             status != 0: u32 len, UTF-8 error message
//
// See docs/protocol.md for the byte-level walk-through.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"

namespace zoomstack::wire {

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::array<std::uint8_t, 4> kHandshakeMagic = {'Z', 'D', 'N', 'Z'};
// Frames larger than this are treated as garbage rather than allocated.
inline constexpr std::uint64_t kMaxElements = 1ull << 28;
inline constexpr std::uint32_t kMaxStringBytes = 1u << 20;

struct DenoiseRequest {
  std::uint64_t id = 0;
  std::uint32_t level = 0;
  std::uint32_t timestep = 0;
  bool conditional = true;
  std::string prompt;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> z;

  std::size_t element_count() const noexcept {
    return static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const DenoiseRequest&) const = default;
};

struct DenoiseResponse {
  std::uint64_t id = 0;
  std::uint8_t status = 0;
  std::vector<float> eps;  // status == 0
  std::string error;       // status != 0

  bool ok() const noexcept { return status == 0; }
  bool operator==(const DenoiseResponse&) const = default;
};

// ---------------------------------------------------------------------------
// Byte sinks and sources

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t>& buffer() noexcept { return buf_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Blocking source of bytes. read_exact throws ProtocolError on a short read.
class ByteSource {
 public:
  virtual ~ByteSource() = default;

  /// Reads up to out.size() bytes; returns 0 only at end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;

  /// False on clean end-of-stream before the first byte.
  bool read_exact_or_eof(std::span<std::uint8_t> out) {
    std::size_t got = 0;
    while (got < out.size()) {
      const std::size_t n = read_some(out.subspan(got));
      if (n == 0) {
        if (got == 0) return false;
        throw ProtocolError("truncated frame: got " + std::to_string(got) + " of " +
                            std::to_string(out.size()) + " bytes");
      }
      got += n;
    }
    return true;
  }

  void read_exact(std::span<std::uint8_t> out) {
    if (!read_exact_or_eof(out) && !out.empty()) throw ProtocolError("truncated frame: end of stream");
  }

  std::uint8_t u8() {
    std::uint8_t b;
    read_exact({&b, 1});
    return b;
  }
  std::uint32_t u32() {
    std::array<std::uint8_t, 4> b;
    read_exact(b);
    return decode_u32(b.data());
  }
  std::uint64_t u64() {
    std::array<std::uint8_t, 8> b;
    read_exact(b);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }
  std::string string() {
    const std::uint32_t n = u32();
    if (n > kMaxStringBytes) throw ProtocolError("string length " + std::to_string(n) + " too large");
    std::string s(n, '\0');
    read_exact({reinterpret_cast<std::uint8_t*>(s.data()), s.size()});
    return s;
  }
  std::vector<float> floats(std::size_t count) {
    if (count > kMaxElements) throw ProtocolError("payload of " + std::to_string(count) + " floats too large");
    std::vector<std::uint8_t> raw(count * 4);
    read_exact(raw);
    std::vector<float> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = std::bit_cast<float>(decode_u32(&raw[4 * k]));
    return out;
  }

  static std::uint32_t decode_u32(const std::uint8_t* b) noexcept {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
};

class BufferSource final : public ByteSource {
 public:
  explicit BufferSource(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t read_some(std::span<std::uint8_t> out) override {
    const std::size_t n = std::min(out.size(), data_.size() - pos_);
    std::memcpy(out.data(), data_.data() + pos_, n);
    pos_ += n;
    return n;
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Frames

inline std::vector<std::uint8_t> encode_handshake(std::uint32_t version = kProtocolVersion) {
  ByteWriter w;
  w.bytes(kHandshakeMagic);
  w.u32(version);
  return w.take();
}

/// Reads a handshake and returns its version; throws on wrong magic.
inline std::uint32_t read_handshake(ByteSource& src) {
  std::array<std::uint8_t, 4> magic;
  src.read_exact(magic);
  if (magic != kHandshakeMagic) throw ProtocolError("bad handshake magic");
  return src.u32();
}

inline void write_request(ByteWriter& w, const DenoiseRequest& r) {
  if (r.z.size() != r.element_count())
    throw ProtocolError("request payload has " + std::to_string(r.z.size()) + " values, header says " +
                        std::to_string(r.element_count()));
  w.u32(kProtocolVersion);
  w.u64(r.id);
  w.u32(r.level);
  w.u32(r.timestep);
  w.u8(r.conditional ? 1 : 0);
  w.string(r.prompt);
  w.u32(r.height);
  w.u32(r.width);
  w.u32(r.channels);
  for (float v : r.z) w.f32(v);
}

inline std::vector<std::uint8_t> encode_request(const DenoiseRequest& r) {
  ByteWriter w;
  write_request(w, r);
  return w.take();
}

/// Returns false on clean end-of-stream before a frame starts.
inline bool read_request(ByteSource& src, DenoiseRequest& r) {
  std::array<std::uint8_t, 4> head;
  if (!src.read_exact_or_eof(head)) return false;
  const std::uint32_t version = ByteSource::decode_u32(head.data());
  if (version != kProtocolVersion)
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  r.id = src.u64();
  r.level = src.u32();
  r.timestep = src.u32();
  const std::uint8_t flag = src.u8();
  if (flag > 1) throw ProtocolError("conditional flag must be 0 or 1");
  r.conditional = flag == 1;
  r.prompt = src.string();
  r.height = src.u32();
  r.width = src.u32();
  r.channels = src.u32();
  const std::uint64_t count = static_cast<std::uint64_t>(r.height) * r.width * r.channels;
  if (count > kMaxElements) throw ProtocolError("request dimensions too large");
  r.z = src.floats(static_cast<std::size_t>(count));
  return true;
}

inline void write_response(ByteWriter& w, const DenoiseResponse& r) {
  w.u64(r.id);
  w.u8(r.status);
  if (r.ok()) {
    for (float v : r.eps) w.f32(v);
  } else {
    w.string(r.error);
  }
}

inline std::vector<std::uint8_t> encode_response(const DenoiseResponse& r) {
  ByteWriter w;
  write_response(w, r);
  return w.take();
}

/// Reads one response. The payload length is not on the wire, so
/// `expected_elements(id)` supplies it from the matching request (and may
/// throw for an unknown id). Returns false on clean end-of-stream.
inline bool read_response(ByteSource& src, DenoiseResponse& r,
                          const std::function<std::size_t(std::uint64_t)>& expected_elements) {
  std::array<std::uint8_t, 8> head;
  if (!src.read_exact_or_eof(head)) return false;
  r.id = 0;
  for (int k = 7; k >= 0; --k) r.id = (r.id << 8) | head[k];
  r.status = src.u8();
  r.eps.clear();
  r.error.clear();
  if (r.ok())
    r.eps = src.floats(expected_elements(r.id));
  else
    r.error = src.string();
  return true;
}

// ---------------------------------------------------------------------------
// Image conversion. The wire is float32; the engine computes in double.

inline std::vector<float> to_wire(const Image& x) {
  std::vector<float> out(x.size());
  auto v = x.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<float>(v[k]);
  return out;
}

inline Image from_wire(std::span<const float> data, int h, int w, int c) {
  Image x(h, w, c);
  if (data.size() != x.size())
    throw ProtocolError("payload has " + std::to_string(data.size()) + " values, expected " +
                        std::to_string(x.size()));
  auto v = x.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = data[k];
  return x;
}

}  // namespace zoomstack::wire
