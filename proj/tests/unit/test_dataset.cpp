#include <random>

#include <gtest/gtest.h>

#include "braindec/dataset.hpp"
#include "braindec/errors.hpp"
#include "braindec/npy.hpp"
#include "test_support.hpp"

using namespace braindec;
using testsupport::TempDir;

namespace {

std::vector<double> to_vec(const Tensor& t) { return t.to_doubles(); }

}  // namespace

TEST(AverageRepetitions, TwoTrialsOneImage) {
  const Tensor trials = Tensor::from<float>({2, 2}, std::vector<float>{1, 2, 3, 4});
  const auto ds = average_repetitions(trials, {7, 7}, "s");
  EXPECT_EQ(ds.betas.shape(), (Shape{1, 2}));
  EXPECT_EQ(to_vec(ds.betas), (std::vector<double>{2, 3}));
  EXPECT_EQ(ds.image_ids, (std::vector<std::int64_t>{7}));
  EXPECT_EQ(ds.subject_id, "s");
}

TEST(AverageRepetitions, FirstOccurrenceOrderAndGroupMeans) {
  // ids [A, B, A, A] -> rows [(r0 + r2 + r3) / 3, r1]
  const std::vector<double> r{1, 10, 2, 20, 4, 40, 9, 90};
  const Tensor trials = Tensor::from<double>({4, 2}, r);
  const auto ds = average_repetitions(trials, {5, 3, 5, 5});
  EXPECT_EQ(ds.image_ids, (std::vector<std::int64_t>{5, 3}));
  const auto v = to_vec(ds.betas);
  EXPECT_DOUBLE_EQ(v[0], (1.0 + 4.0 + 9.0) / 3.0);
  EXPECT_DOUBLE_EQ(v[1], (10.0 + 40.0 + 90.0) / 3.0);
  EXPECT_DOUBLE_EQ(v[2], 2.0);
  EXPECT_DOUBLE_EQ(v[3], 20.0);
}

TEST(AverageRepetitions, KeepsInputDtype) {
  const Tensor trials = Tensor::from<float>({3, 1}, std::vector<float>{0.1f, 0.2f, 0.4f});
  const auto ds = average_repetitions(trials, {1, 1, 1});
  EXPECT_EQ(ds.betas.dtype(), DType::f32);
  // f64 accumulation: the f32 result is the rounded exact mean of the f32 inputs
  const double exact = (double(0.1f) + double(0.2f) + double(0.4f)) / 3.0;
  EXPECT_EQ(ds.betas.values<float>()[0], static_cast<float>(exact));
}

TEST(AverageRepetitions, IdempotentOnUniqueIds) {
  const auto x = testsupport::gaussian_floats(12, 3);
  const Tensor trials = Tensor::from<float>({4, 3}, x);
  const auto ds = average_repetitions(trials, {4, 3, 2, 1});
  EXPECT_EQ(ds.betas, trials);
  const auto again = average_repetitions(ds.betas, ds.image_ids);
  EXPECT_EQ(again.betas, ds.betas);
}

TEST(AverageRepetitions, PermutationInvariantWithinGroup) {
  const Tensor a = Tensor::from<double>({3, 1}, std::vector<double>{0.3, 0.7, 1.9});
  const Tensor b = Tensor::from<double>({3, 1}, std::vector<double>{1.9, 0.3, 0.7});
  EXPECT_EQ(average_repetitions(a, {1, 1, 1}).betas.to_doubles()[0],
            average_repetitions(b, {1, 1, 1}).betas.to_doubles()[0]);
}

TEST(AverageRepetitions, NsdRepetitionStructure) {
  // 24980 trials over 8859 images: 7262 images seen 3x, 1597 seen 2x... any split
  // summing to 24980 trials with at most 3 repetitions works for the count check.
  const std::size_t images = 8859, trials_n = 24980;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < images; ++i) ids.push_back(static_cast<std::int64_t>(i));
  std::size_t extra = trials_n - images;  // 16121 additional presentations
  for (std::size_t i = 0; i < images && extra > 0; ++i) {
    const std::size_t add = std::min<std::size_t>(2, extra);
    for (std::size_t k = 0; k < add; ++k) ids.push_back(static_cast<std::int64_t>(i));
    extra -= add;
  }
  ASSERT_EQ(ids.size(), trials_n);
  std::mt19937_64 rng(1);
  std::shuffle(ids.begin(), ids.end(), rng);
  const Tensor trials(DType::f32, {trials_n, 2});
  const auto ds = average_repetitions(trials, ids);
  EXPECT_EQ(ds.n_samples(), images);
}

TEST(AverageRepetitions, LengthMismatchIsArgumentError) {
  const Tensor trials(DType::f32, {3, 2});
  EXPECT_THROW(average_repetitions(trials, {1, 2}), ArgumentError);
}

TEST(RoiMask, ValidatesIndices) {
  EXPECT_NO_THROW(RoiMask("a", {0, 2, 5}, 6));
  EXPECT_THROW(RoiMask("a", {2, 2}, 6), ArgumentError);
  EXPECT_THROW(RoiMask("a", {3, 1}, 6), ArgumentError);
  EXPECT_THROW(RoiMask("a", {6}, 6), ArgumentError);
  EXPECT_THROW(RoiMask("a", {-1}, 6), ArgumentError);
  const auto m = RoiMask::from_unsorted("b", {5, 1, 5, 3}, 6);
  EXPECT_EQ(m.indices(), (std::vector<std::int64_t>{1, 3, 5}));
  EXPECT_TRUE(m.contains(3));
  EXPECT_FALSE(m.contains(4));
}

TEST(ApplyMask, DirectGather) {
  const Tensor p = Tensor::from<double>({4}, std::vector<double>{10, 20, 30, 40});
  const Tensor out = apply_mask(p, RoiMask("m", {1, 3}, 4));
  EXPECT_EQ(out.to_doubles(), (std::vector<double>{20, 40}));
}

TEST(ApplyMask, FullMaskIsIdentity) {
  const Tensor p = Tensor::from<float>({2, 3}, testsupport::gaussian_floats(6, 9));
  EXPECT_EQ(apply_mask(p, RoiMask::full("all", 3)), p);
}

TEST(ApplyMask, OrderPreservedPerRow) {
  const auto x = testsupport::gaussian_floats(3 * 10, 4);
  const Tensor p = Tensor::from<float>({3, 10}, x);
  const RoiMask m("m", {0, 4, 7, 9}, 10);
  const Tensor out = apply_mask(p, m);
  ASSERT_EQ(out.shape(), (Shape{3, 4}));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_EQ(out.values<float>()[r * 4 + k], x[r * 10 + static_cast<std::size_t>(m.indices()[k])]);
}

TEST(ApplyMask, SubjectOneGeneralMaskLength) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < 15724; ++i) idx.push_back(i * 3);
  const RoiMask general("nsdgeneral", idx, 15724 * 3);
  const Tensor volume(DType::f32, {15724 * 3});
  EXPECT_EQ(apply_mask(volume, general).numel(), 15724u);
}

TEST(ApplyMask, LengthMismatchIsArgumentError) {
  const Tensor p(DType::f32, {5});
  EXPECT_THROW(apply_mask(p, RoiMask("m", {1}, 4)), ArgumentError);
}

TEST(MaskAndIds, ReadFromNpy) {
  TempDir dir;
  npy::write(Tensor::from<std::int32_t>({3}, std::vector<std::int32_t>{1, 4, 8}), dir / "m.npy");
  const auto m = read_mask(dir / "m.npy", "m", 10);
  EXPECT_EQ(m.indices(), (std::vector<std::int64_t>{1, 4, 8}));
  npy::write(Tensor::from<std::int64_t>({2}, std::vector<std::int64_t>{7, -2}), dir / "ids.npy");
  EXPECT_EQ(read_ids(dir / "ids.npy"), (std::vector<std::int64_t>{7, -2}));
  npy::write(Tensor::from<float>({2}, std::vector<float>{1, 2}), dir / "bad.npy");
  EXPECT_THROW(read_ids(dir / "bad.npy"), Error);
}

TEST(PathManifest, RelativePathsResolveAgainstManifest) {
  TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  testsupport::spit(dir / "sub" / "m.json", R"({"fmri": "betas.npy", "mask": "/abs/mask.npy"})");
  const auto m = read_path_manifest(dir / "sub" / "m.json");
  EXPECT_EQ(m.at("fmri"), dir / "sub" / "betas.npy");
  EXPECT_EQ(m.at("mask"), std::filesystem::path("/abs/mask.npy"));

  write_path_manifest(m, dir / "out.json");
  EXPECT_EQ(read_path_manifest(dir / "out.json"), m);
}
