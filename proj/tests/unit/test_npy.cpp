#include <bit>
#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "braindec/errors.hpp"
#include "braindec/npy.hpp"
#include "test_support.hpp"

using namespace braindec;
using testsupport::fixture;
using testsupport::slurp;
using testsupport::TempDir;

namespace {

std::vector<std::byte> as_bytes(const std::string& s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

// NPY v1.0 image assembled by hand from a header dict and a raw payload.
std::string npy_v1(const std::string& dict, const std::string& payload) {
  std::string header = dict;
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::string out = "\x93NUMPY";
  out += '\x01';
  out += '\x00';
  out += static_cast<char>(header.size() & 0xFF);
  out += static_cast<char>(header.size() >> 8);
  return out + header + payload;
}

template <typename T>
std::string raw(std::initializer_list<T> values) {
  std::string s(values.size() * sizeof(T), '\0');
  std::memcpy(s.data(), std::data(values), s.size());
  return s;
}

}  // namespace

TEST(Npy, HandBuiltHeaderFor2x3Float) {
  const std::vector<float> v{0.5f, -1.0f, 2.0f, 3.25f, 4.0f, -0.0f};
  const Tensor t = Tensor::from<float>({2, 3}, v);
  const auto bytes = npy::serialize(t);

  std::string expected = "\x93NUMPY";
  expected += '\x01';
  expected += '\x00';
  // 128 total bytes before data: 10-byte prefix + 118-byte header.
  expected += static_cast<char>(118);
  expected += '\x00';
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }";
  dict += std::string(128 - 10 - dict.size() - 1, ' ');
  dict += '\n';
  expected += dict;
  expected.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));

  ASSERT_EQ(bytes.size(), expected.size());
  EXPECT_EQ(std::memcmp(bytes.data(), expected.data(), expected.size()), 0);
  EXPECT_EQ(npy::parse(bytes), t);
}

TEST(Npy, WriterMatchesNumpyBytes) {
  const std::vector<float> v{0, 1, 2, 3, 4, 5};
  const auto ours = npy::serialize(Tensor::from<float>({2, 3}, v));
  const auto theirs = slurp(fixture("npy/f4_2x3.npy"));
  ASSERT_EQ(ours.size(), theirs.size());
  EXPECT_EQ(std::memcmp(ours.data(), theirs.data(), theirs.size()), 0);
}

TEST(Npy, DataStartsOn64ByteBoundary) {
  for (const Shape& s : {Shape{}, Shape{7}, Shape{3, 4}, Shape{2, 3, 4, 5}, Shape{123456789, 2}}) {
    const auto h = npy::header_text(DType::f64, s);
    EXPECT_EQ((10 + h.size()) % 64, 0u) << shape_string(s);
    EXPECT_EQ(h.back(), '\n');
  }
}

TEST(Npy, FullScaleBetaFileSize) {
  // 8859 averaged images x 15724 voxels (subject 1), f32.
  const Shape shape{8859, 15724};
  const std::size_t header = 10 + npy::header_text(DType::f32, shape).size();
  EXPECT_EQ(header, 128u);
  EXPECT_EQ(shape_numel(shape) * 4, 557195664u);
  EXPECT_EQ(header + shape_numel(shape) * 4, 557195664u + 128u);
}

TEST(Npy, WrittenFileSizeIsHeaderPlusPayload) {
  TempDir dir;
  const Tensor t(DType::f32, {300, 211});
  npy::write(t, dir / "x.npy");
  EXPECT_EQ(std::filesystem::file_size(dir / "x.npy"), 128u + 300u * 211u * 4u);
}

TEST(Npy, ScalarFromNumpy) {
  const Tensor t = npy::read(fixture("npy/f8_scalar.npy"));
  EXPECT_EQ(t.rank(), 0u);
  EXPECT_EQ(t.numel(), 1u);
  EXPECT_EQ(t.values<double>()[0], 5.0);
}

TEST(Npy, FortranOrderRemappedToRowMajor) {
  const Tensor t = npy::read(fixture("npy/f8_fortran_2x3.npy"));
  ASSERT_EQ(t.shape(), (Shape{2, 3}));
  const auto v = t.values<double>();
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Npy, FortranOrderHandBuilt) {
  const std::string file =
      npy_v1("{'descr': '<f8', 'fortran_order': True, 'shape': (2, 3), }", raw<double>({1, 4, 2, 5, 3, 6}));
  const Tensor t = npy::parse(as_bytes(file));
  const auto v = t.values<double>();
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Npy, FortranRank3MatchesNumpyCOrder) {
  const Tensor f = npy::read(fixture("npy/f8_fortran_3x4x2.npy"));
  const Tensor c = npy::read(fixture("npy/f8_c_3x4x2.npy"));
  EXPECT_EQ(f, c);
}

TEST(Npy, EmptyTensorRoundtrip) {
  TempDir dir;
  const Tensor t(DType::f32, {0, 5});
  npy::write(t, dir / "e.npy");
  const Tensor back = npy::read(dir / "e.npy");
  EXPECT_EQ(back.shape(), (Shape{0, 5}));
  EXPECT_EQ(back, t);
  const Tensor np = npy::read(fixture("npy/i8_empty_0x5.npy"));
  EXPECT_EQ(np.dtype(), DType::i64);
  EXPECT_EQ(np.shape(), (Shape{0, 5}));
}

TEST(Npy, NanPayloadsPreserved) {
  const Tensor t = npy::read(fixture("npy/f4_nan.npy"));
  const auto v = t.values<float>();
  const std::uint32_t expected[] = {0x7FC00001u, 0xFFC00000u, 0x7F800001u, 0x3F800000u};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::bit_cast<std::uint32_t>(v[i]), expected[i]);
  EXPECT_EQ(npy::parse(npy::serialize(t)), t);
}

TEST(Npy, BoolDtype) {
  const Tensor t = npy::read(fixture("npy/b1_vec.npy"));
  EXPECT_EQ(t.dtype(), DType::boolean);
  ASSERT_EQ(t.numel(), 4u);
  EXPECT_EQ(t.as_double(0), 1.0);
  EXPECT_EQ(t.as_double(1), 0.0);
  EXPECT_NE(npy::header_text(t).find("'|b1'"), std::string::npos);
  EXPECT_EQ(npy::parse(npy::serialize(t)), t);
}

TEST(Npy, Version2Header) {
  const Tensor t = npy::read(fixture("npy/i4_v2_2x2x2.npy"));
  EXPECT_EQ(t.dtype(), DType::i32);
  EXPECT_EQ(t.shape(), (Shape{2, 2, 2}));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(t.values<std::int32_t>()[i], static_cast<std::int32_t>(i));
}

TEST(Npy, BigEndianRejectedWithDescriptor) {
  try {
    npy::read(fixture("npy/f4_be.npy"));
    FAIL() << "expected UnsupportedDtypeError";
  } catch (const UnsupportedDtypeError& e) {
    EXPECT_EQ(e.descriptor(), ">f4");
  }
}

TEST(Npy, UnsupportedDtypeNamesDescriptor) {
  try {
    npy::read(fixture("npy/u2_vec.npy"));
    FAIL() << "expected UnsupportedDtypeError";
  } catch (const UnsupportedDtypeError& e) {
    EXPECT_EQ(e.descriptor(), "<u2");
  }
}

TEST(Npy, BadMagicReportsOffsetZero) {
  std::string file = npy_v1("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", raw<float>({1.0f}));
  file[0] = 'X';
  try {
    npy::parse(as_bytes(file));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Npy, UnknownVersionRejected) {
  std::string file = npy_v1("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", raw<float>({1.0f}));
  file[6] = '\x07';
  try {
    npy::parse(as_bytes(file));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
}

TEST(Npy, TruncatedPayloadReportsDataOffset) {
  const std::string file =
      npy_v1("{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }", raw<float>({1.0f, 2.0f}));
  try {
    npy::parse(as_bytes(file));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 128u);  // 10-byte preamble + 118-byte padded header
  }
  TempDir dir;
  testsupport::spit(dir / "t.npy", file);
  EXPECT_THROW(npy::read(dir / "t.npy"), FormatError);
}

TEST(Npy, MalformedHeaderOffsetInsideHeader) {
  const std::string file = npy_v1("{'descr': '<f4', 'fortran_order': Maybe, 'shape': (1,), }", raw<float>({1.0f}));
  try {
    npy::parse(as_bytes(file));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GE(e.offset(), 10u);
    EXPECT_LT(e.offset(), 64u);
  }
}

TEST(Npy, UnknownKeysIgnoredRequiredKeysEnforced) {
  const std::string extra =
      npy_v1("{'descr': '<i8', 'extra': [1, 'x'], 'fortran_order': False, 'shape': (2,), }", raw<std::int64_t>({3, 4}));
  const Tensor t = npy::parse(as_bytes(extra));
  EXPECT_EQ(t.values<std::int64_t>()[1], 4);

  const std::string missing = npy_v1("{'descr': '<i8', 'shape': (2,), }", raw<std::int64_t>({3, 4}));
  EXPECT_THROW(npy::parse(as_bytes(missing)), FormatError);
}

TEST(Npy, MissingFileIsPathError) {
  EXPECT_THROW(npy::read("/nonexistent/definitely/not.npy"), PathError);
}

TEST(Npy, ReadInfoDoesNotNeedPayload) {
  TempDir dir;
  npy::write(Tensor(DType::i64, {3, 4, 5}), dir / "a.npy");
  const auto info = npy::read_info(dir / "a.npy");
  EXPECT_EQ(info.dtype, DType::i64);
  EXPECT_EQ(info.shape, (Shape{3, 4, 5}));
  EXPECT_FALSE(info.fortran_order);
  EXPECT_EQ(info.data_offset, 128u);
}

TEST(Npy, AllDtypesRoundtripThroughFiles) {
  TempDir dir;
  const std::vector<Tensor> cases{
      Tensor::from<float>({2, 2}, std::vector<float>{1.5f, -2.0f, INFINITY, -0.0f}),
      Tensor::from<double>({3}, std::vector<double>{1e300, -1e-300, NAN}),
      Tensor::from<std::int32_t>({1, 1, 2}, std::vector<std::int32_t>{INT32_MIN, INT32_MAX}),
      Tensor::from<std::int64_t>({2}, std::vector<std::int64_t>{INT64_MIN, 42}),
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto p = dir / ("c" + std::to_string(i) + ".npy");
    npy::write(cases[i], p);
    EXPECT_EQ(npy::read(p), cases[i]) << i;
  }
}
