#include "braindec/npy.hpp"

#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <optional>

namespace braindec::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kAlign = 64;

std::string descr_for(DType dt) {
  switch (dt) {
    case DType::f32: return "<f4";
    case DType::f64: return "<f8";
    case DType::i32: return "<i4";
    case DType::i64: return "<i8";
    case DType::boolean: return "|b1";
  }
  return {};
}

DType dtype_for(const std::string& descr) {
  if (descr.size() >= 2) {
    char order = descr[0];
    std::string kind = descr.substr(1);
    if (kind == "b1" && (order == '|' || order == '<' || order == '=')) return DType::boolean;
    if (order == '<' || order == '=') {
      if (kind == "f4") return DType::f32;
      if (kind == "f8") return DType::f64;
      if (kind == "i4") return DType::i32;
      if (kind == "i8") return DType::i64;
    }
  }
  throw UnsupportedDtypeError(descr);
}

// Minimal reader for the Python dict literal in the NPY header. Unknown keys
// are parsed generically and skipped.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  struct Fields {
    std::optional<std::string> descr;
    std::optional<bool> fortran_order;
    std::optional<Shape> shape;
  };

  Fields parse() {
    Fields f;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') { ++pos_; break; }
      std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        f.descr = parse_string();
      } else if (key == "fortran_order") {
        f.fortran_order = parse_bool();
      } else if (key == "shape") {
        f.shape = parse_shape();
      } else {
        skip_value();
      }
      skip_ws();
      if (peek() == ',') { ++pos_; continue; }
      expect('}');
      break;
    }
    if (!f.descr) fail("header is missing 'descr'");
    if (!f.fortran_order) fail("header is missing 'fortran_order'");
    if (!f.shape) fail("header is missing 'shape'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw FormatError("NPY header: " + msg, base_ + pos_); }

  char peek() const {
    if (pos_ >= text_.size()) fail("unexpected end of header");
    return text_[pos_];
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  std::string parse_string() {
    char q = peek();
    if (q != '\'' && q != '"') fail("expected a quoted string");
    ++pos_;
    std::string out;
    while (peek() != q) out += text_[pos_++];
    ++pos_;
    return out;
  }
  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") { pos_ += 4; return true; }
    if (text_.substr(pos_, 5) == "False") { pos_ += 5; return false; }
    fail("expected True or False");
  }
  std::size_t parse_uint() {
    std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(text_[pos_] - '0');
      ++pos_;
    }
    if (pos_ < text_.size() && text_[pos_] == 'L') ++pos_;  // Python 2 longs
    if (pos_ == start) fail("expected a non-negative integer");
    return v;
  }
  Shape parse_shape() {
    expect('(');
    Shape shape;
    while (true) {
      skip_ws();
      if (peek() == ')') { ++pos_; break; }
      shape.push_back(parse_uint());
      skip_ws();
      if (peek() == ',') { ++pos_; continue; }
      expect(')');
      break;
    }
    return shape;
  }
  void skip_value() {
    char c = peek();
    if (c == '\'' || c == '"') { parse_string(); return; }
    if (c == '(' || c == '[' || c == '{') {
      char close = c == '(' ? ')' : c == '[' ? ']' : '}';
      ++pos_;
      while (true) {
        skip_ws();
        if (peek() == close) { ++pos_; return; }
        skip_value();
        skip_ws();
        if (peek() == ':' || peek() == ',') ++pos_;
      }
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '.' || text_[pos_] == '-' || text_[pos_] == '+' || text_[pos_] == '_')) {
      ++pos_;
    }
    if (pos_ == start) fail("unparseable value");
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> fortran_to_c(const std::vector<std::byte>& src, const Shape& shape, std::size_t elem) {
  const std::size_t n = shape_numel(shape);
  const std::size_t rank = shape.size();
  if (rank < 2 || n == 0) return src;
  std::vector<std::byte> dst(src.size());
  std::vector<std::size_t> idx(rank, 0);
  // Walk the row-major index space; the column-major source offset has axis 0 fastest.
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t f = 0;
    std::size_t stride = 1;
    for (std::size_t a = 0; a < rank; ++a) {
      f += idx[a] * stride;
      stride *= shape[a];
    }
    std::memcpy(dst.data() + c * elem, src.data() + f * elem, elem);
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return dst;
}

struct HeaderInfo {
  DType dtype;
  Shape shape;
  bool fortran_order;
  std::size_t data_offset;
};

// Validates magic/version and returns the header length field and prefix size.
std::pair<std::size_t, std::size_t> read_prefix(std::span<const std::byte> head) {
  if (head.size() < kMagicLen || std::memcmp(head.data(), kMagic, kMagicLen) != 0) {
    std::size_t off = 0;
    while (off < std::min(head.size(), kMagicLen) && head[off] == static_cast<std::byte>(kMagic[off])) ++off;
    throw FormatError("missing NPY magic string", off);
  }
  if (head.size() < kMagicLen + 2) throw FormatError("truncated version field", head.size());
  const auto major = static_cast<unsigned>(head[6]);
  std::size_t header_len = 0;
  if (major == 1) {
    if (head.size() < 10) throw FormatError("truncated header length", head.size());
    header_len = static_cast<std::size_t>(head[8]) | (static_cast<std::size_t>(head[9]) << 8);
    return {header_len, 10};
  }
  if (major == 2) {
    if (head.size() < 12) throw FormatError("truncated header length", head.size());
    for (int i = 3; i >= 0; --i) header_len = (header_len << 8) | static_cast<std::size_t>(head[8 + i]);
    return {header_len, 12};
  }
  throw FormatError("unsupported NPY version " + std::to_string(major) + "." +
                        std::to_string(static_cast<unsigned>(head[7])),
                    6);
}

HeaderInfo parse_header(std::string_view text, std::size_t prefix) {
  auto fields = HeaderParser(text, prefix).parse();
  return {dtype_for(*fields.descr), *fields.shape, *fields.fortran_order, prefix + text.size()};
}

Tensor finish(const HeaderInfo& info, std::vector<std::byte> payload) {
  if (info.fortran_order) payload = fortran_to_c(payload, info.shape, dtype_size(info.dtype));
  return Tensor(info.dtype, info.shape, std::move(payload));
}

}  // namespace

Tensor parse(std::span<const std::byte> file) {
  const auto [header_len, prefix] = read_prefix(file.first(std::min<std::size_t>(file.size(), 12)));
  if (file.size() < prefix + header_len) throw FormatError("header extends past end of file", file.size());
  std::string_view text(reinterpret_cast<const char*>(file.data() + prefix), header_len);
  const HeaderInfo info = parse_header(text, prefix);
  const std::size_t nbytes = shape_numel(info.shape) * dtype_size(info.dtype);
  if (file.size() - info.data_offset < nbytes) {
    throw FormatError("payload holds " + std::to_string(file.size() - info.data_offset) +
                          " bytes, header requires " + std::to_string(nbytes),
                      info.data_offset);
  }
  auto first = file.begin() + static_cast<std::ptrdiff_t>(info.data_offset);
  return finish(info, std::vector<std::byte>(first, first + static_cast<std::ptrdiff_t>(nbytes)));
}

std::string header_text(DType dtype, const Shape& dims) {
  std::string shape;
  shape += '(';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) shape += ", ";
    shape += std::to_string(dims[i]);
  }
  if (dims.size() == 1) shape += ',';
  shape += ')';
  std::string dict = "{'descr': '" + descr_for(dtype) + "', 'fortran_order': False, 'shape': " + shape + ", }";
  const std::size_t unpadded = 10 + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlign - 1) / kAlign * kAlign;
  dict.append(padded - unpadded, ' ');
  dict += '\n';
  return dict;
}

std::string header_text(const Tensor& t) { return header_text(t.dtype(), t.shape()); }

std::vector<std::byte> serialize(const Tensor& t) {
  const std::string header = header_text(t);
  if (header.size() > 0xFFFF) throw ArgumentError("NPY 1.0 header too long for shape " + shape_string(t.shape()));
  std::vector<std::byte> out;
  out.reserve(10 + header.size() + t.bytes().size());
  for (std::size_t i = 0; i < kMagicLen; ++i) out.push_back(static_cast<std::byte>(kMagic[i]));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(header.size() & 0xFF));
  out.push_back(static_cast<std::byte>(header.size() >> 8));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), t.bytes().begin(), t.bytes().end());
  return out;
}

namespace {

HeaderInfo read_stream_header(std::ifstream& in) {
  std::array<std::byte, 12> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  in.clear();
  const auto [header_len, prefix] = read_prefix(std::span<const std::byte>(head.data(), got));
  std::string text(header_len, '\0');
  in.seekg(static_cast<std::streamoff>(prefix));
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::size_t>(in.gcount()) != header_len) {
    throw FormatError("header extends past end of file", prefix + static_cast<std::size_t>(in.gcount()));
  }
  return parse_header(text, prefix);
}

}  // namespace

Info read_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open NPY file '" + path.string() + "'");
  const HeaderInfo info = read_stream_header(in);
  return {info.dtype, info.shape, info.fortran_order, info.data_offset};
}

Tensor read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open NPY file '" + path.string() + "'");
  const HeaderInfo info = read_stream_header(in);
  in.seekg(static_cast<std::streamoff>(info.data_offset));
  const std::size_t nbytes = shape_numel(info.shape) * dtype_size(info.dtype);
  std::vector<std::byte> payload(nbytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(nbytes));
  if (static_cast<std::size_t>(in.gcount()) != nbytes) {
    throw FormatError("payload holds " + std::to_string(in.gcount()) + " bytes, header requires " +
                          std::to_string(nbytes),
                      info.data_offset);
  }
  return finish(info, std::move(payload));
}

void write(const Tensor& t, const std::filesystem::path& path) {
  const std::string header = header_text(t);
  if (header.size() > 0xFFFF) throw ArgumentError("NPY 1.0 header too long for shape " + shape_string(t.shape()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  char prefix[10] = {'\x93', 'N', 'U', 'M', 'P', 'Y', 1, 0, static_cast<char>(header.size() & 0xFF),
                     static_cast<char>(header.size() >> 8)};
  out.write(prefix, sizeof prefix);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(t.bytes().data()), static_cast<std::streamsize>(t.bytes().size()));
  if (!out) throw PathError("failed writing '" + path.string() + "'");
}

}  // namespace braindec::npy
