#include "v2tex/weight_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "v2tex/error.hpp"

namespace v2tex {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::string_view take(std::uint64_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("weight file truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const NamedTensor& require(const std::vector<NamedTensor>& tensors, std::string_view name) {
  auto it = std::find_if(tensors.begin(), tensors.end(),
                         [&](const NamedTensor& t) { return t.name == name; });
  if (it == tensors.end()) throw FormatError("weight file lacks tensor '" + std::string(name) + "'");
  return *it;
}

const NamedTensor* optional_tensor(const std::vector<NamedTensor>& tensors, std::string_view name) {
  auto it = std::find_if(tensors.begin(), tensors.end(),
                         [&](const NamedTensor& t) { return t.name == name; });
  return it == tensors.end() ? nullptr : &*it;
}

}  // namespace

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string encode_weight_file(const std::vector<NamedTensor>& tensors) {
  std::string out(kWeightMagic);
  put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    std::uint64_t expected = 1;
    for (auto d : t.shape) expected *= d;
    if (expected != t.values.size()) {
      throw ValidationError("tensor '" + t.name + "' payload does not match shape " +
                            shape_string(t.shape));
    }
    put_u64(out, t.name.size());
    out += t.name;
    put_u64(out, t.shape.size());
    for (auto d : t.shape) put_u64(out, d);
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  const std::uint32_t crc = crc32(out);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((crc >> (8 * i)) & 0xff));
  return out;
}

std::vector<NamedTensor> decode_weight_file(std::string_view bytes) {
  if (bytes.size() < kWeightMagic.size() + 8 + 4) throw FormatError("weight file truncated");
  if (bytes.substr(0, kWeightMagic.size()) != kWeightMagic) {
    if (bytes.substr(0, 5) == "V2TEX") throw FormatError("unsupported weight file version");
    throw FormatError("not a weight file (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= std::uint32_t{static_cast<unsigned char>(bytes[body.size() + i])} << (8 * i);
  }
  if (crc32(body) != stored) throw FormatError("weight file CRC mismatch");

  Reader r(body.substr(kWeightMagic.size()));
  const std::uint64_t count = r.u64();
  std::vector<NamedTensor> tensors;
  for (std::uint64_t t = 0; t < count; ++t) {
    NamedTensor tensor;
    tensor.name = std::string(r.take(r.u64()));
    const std::uint64_t rank = r.u64();
    if (rank > 16) throw FormatError("implausible tensor rank in weight file");
    std::uint64_t elements = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      tensor.shape.push_back(r.u64());
      elements *= tensor.shape.back();
    }
    if (elements > r.remaining() / 8) throw FormatError("weight file truncated");
    tensor.values.resize(elements);
    for (auto& v : tensor.values) v = std::bit_cast<double>(r.u64());
    tensors.push_back(std::move(tensor));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in weight file");
  return tensors;
}

void write_weight_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const std::string bytes = encode_weight_file(tensors);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write weight file: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing weight file: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move weight file into place: " + ec.message());
}

std::vector<NamedTensor> read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file: " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_weight_file(bytes);
}

void save_checkpoint(const V2Params& params, const std::filesystem::path& path,
                     std::uint64_t step) {
  params.validate();
  const auto d = static_cast<std::uint64_t>(params.d);
  std::vector<NamedTensor> tensors{
      {"theta",
       {d, static_cast<std::uint64_t>(params.in_channels), static_cast<std::uint64_t>(params.kernel),
        static_cast<std::uint64_t>(params.kernel)},
       params.theta},
      {"bn_running_mean", {d}, params.running_mean},
      {"bn_running_var", {d}, params.running_var},
      {"bn_momentum", {1}, {params.momentum}},
      {"pool_window", {1}, {static_cast<double>(params.pool_window)}},
      {"step", {1}, {static_cast<double>(step)}},
  };
  write_weight_file(path, tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<V2Params>& expected) {
  const auto tensors = read_weight_file(path);
  const auto& theta = require(tensors, "theta");
  const auto& mean = require(tensors, "bn_running_mean");
  const auto& var = require(tensors, "bn_running_var");
  if (theta.shape.size() != 4 || theta.shape[2] != theta.shape[3]) {
    throw FormatError("theta must have shape [d, channels, k, k], got " + shape_string(theta.shape));
  }
  if (expected) {
    const std::vector<std::uint64_t> want{
        static_cast<std::uint64_t>(expected->d), static_cast<std::uint64_t>(expected->in_channels),
        static_cast<std::uint64_t>(expected->kernel), static_cast<std::uint64_t>(expected->kernel)};
    if (theta.shape != want) {
      throw ValidationError("shape mismatch: file has theta " + shape_string(theta.shape) +
                            ", expected " + shape_string(want));
    }
  }
  const std::vector<std::uint64_t> vec_shape{theta.shape[0]};
  if (mean.shape != vec_shape || var.shape != vec_shape) {
    throw FormatError("normalization statistics do not match theta's filter count");
  }

  Checkpoint ck;
  V2Params& p = ck.params;
  p.d = static_cast<int>(theta.shape[0]);
  p.in_channels = static_cast<int>(theta.shape[1]);
  p.kernel = static_cast<int>(theta.shape[2]);
  p.theta = theta.values;
  p.running_mean = mean.values;
  p.running_var = var.values;
  if (const auto* m = optional_tensor(tensors, "bn_momentum"); m && m->values.size() == 1) {
    p.momentum = m->values[0];
  }
  if (const auto* w = optional_tensor(tensors, "pool_window"); w && w->values.size() == 1) {
    p.pool_window = static_cast<int>(w->values[0]);
  }
  if (const auto* s = optional_tensor(tensors, "step"); s && s->values.size() == 1) {
    ck.step = static_cast<std::uint64_t>(s->values[0]);
  }
  p.validate();
  return ck;
}

}  // namespace v2tex
