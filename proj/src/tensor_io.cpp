#include "fixsal/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace fixsal {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = std::uint16_t(bytes_[pos_]) | std::uint16_t(bytes_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() == 0 || t.rank() > 0xffff) throw ShapeError("tensor rank out of range for .egct");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  out.push_back(kTensorVersion);
  out.push_back(kTensorDtypeF32);
  put_u16(out, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > 0xffffffffu) throw ShapeError("tensor dim exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (!std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin())) {
    throw FormatError("bad magic, expected \"EGCT\"", 0);
  }
  for (int i = 0; i < 4; ++i) r.u8("magic");
  const std::size_t version_at = r.offset();
  if (r.u8("version") != kTensorVersion) throw FormatError("unsupported version", version_at);
  const std::size_t dtype_at = r.offset();
  if (r.u8("dtype") != kTensorDtypeF32) throw FormatError("unsupported dtype", dtype_at);
  const std::size_t rank_at = r.offset();
  const std::uint16_t rank = r.u16("rank");
  if (rank == 0) throw FormatError("rank must be positive", rank_at);
  std::vector<std::size_t> dims;
  std::size_t count = 1;
  for (std::uint16_t i = 0; i < rank; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t d = r.u32("dims");
    if (d == 0) throw FormatError("zero dimension", at);
    dims.push_back(d);
    count *= d;
  }
  const std::size_t payload_at = r.offset();
  if ((bytes.size() - payload_at) / 4 < count) {
    throw FormatError("truncated payload: expected " + std::to_string(count * 4) + " bytes",
                      bytes.size());
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(r.u32("payload"));
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes after payload", r.offset());
  return Tensor(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("PGM export expects an HxW tensor");
  const std::string header =
      "P5\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : image.data()) {
    const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
    bytes.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  write_file_bytes(path, bytes);
}

Tensor read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw FormatError(std::string("expected ") + what, start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM", 0);
  pos = 2;
  const std::size_t w = read_int("width");
  const std::size_t h = read_int("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = read_int("maxval");
  if (maxval != 255) throw FormatError("only maxval 255 is supported", maxval_at);
  if (w == 0 || h == 0) throw FormatError("zero image dimension", 2);
  ++pos;  // single whitespace before raster
  if (bytes.size() < pos + w * h) throw FormatError("truncated raster", bytes.size());
  Tensor out({h, w});
  for (std::size_t i = 0; i < w * h; ++i) out[i] = bytes[pos + i] / 255.0f;
  return out;
}

}  // namespace fixsal
