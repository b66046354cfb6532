#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"
#include "uactn/data.hpp"

namespace uactn {
namespace {

Manifest small_manifest(std::uint64_t seed = 5) {
  Manifest m;
  m.classes = 4;
  m.dim = 8;
  m.views = 3;
  m.sketch_train = 10;
  m.sketch_test = 5;
  m.shape_train = 3;
  m.shape_test = 2;
  m.noise_frac = 0.2;
  m.seed = seed;
  return m;
}

Dataset generated(const Manifest& m) {
  Rng rng(m.seed);
  return generate(m, rng);
}

std::size_t count_noisy(const std::vector<SampleRecord>& recs) {
  std::size_t n = 0;
  for (const auto& r : recs) n += r.noisy;
  return n;
}

TEST(Generate, DefaultSplitSizes) {
  Manifest m;
  m.classes = 3;
  const Dataset ds = generated(m);
  EXPECT_EQ(select(ds.sketches, Split::train).size(), 150u);
  EXPECT_EQ(select(ds.sketches, Split::test).size(), 90u);
  EXPECT_EQ(select(ds.shapes, Split::train).size(), 30u);
  EXPECT_EQ(select(ds.shapes, Split::test).size(), 12u);
  for (const auto& r : ds.shapes) {
    EXPECT_EQ(r.payload.rows(), m.views);
    EXPECT_EQ(r.payload.cols(), m.dim);
  }
}

TEST(Generate, NoNoiseMeansNoNoisyRecords) {
  Manifest m = small_manifest();
  m.noise_frac = 0.0;
  EXPECT_EQ(count_noisy(generated(m).sketches), 0u);
}

TEST(Generate, NoisyCountPerClassAndSplit) {
  for (double frac : {0.1, 0.2, 0.35, 1.0}) {
    Manifest m = small_manifest();
    m.noise_frac = frac;
    const Dataset ds = generated(m);
    for (Split sp : {Split::train, Split::test}) {
      const std::size_t n = sp == Split::train ? m.sketch_train : m.sketch_test;
      for (std::size_t c = 0; c < m.classes; ++c) {
        std::size_t noisy = 0;
        for (const auto& r : ds.sketches) noisy += r.split == sp && r.label == c && r.noisy;
        const double target = frac * static_cast<double>(n);
        EXPECT_LE(std::abs(static_cast<double>(noisy) - target), 1.0) << frac;
      }
    }
  }
}

TEST(Generate, ClassesAreSeparated) {
  Manifest m = small_manifest();
  m.noise_frac = 0.0;
  m.dim = 16;
  const Dataset ds = generated(m);
  double intra = 0, inter = 0, ni = 0, ne = 0;
  for (std::size_t i = 0; i < ds.sketches.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.sketches.size(); ++j) {
      const auto& a = ds.sketches[i];
      const auto& b = ds.sketches[j];
      const double c = test::naive_cosine(test::to_rows(a.payload)[0], test::to_rows(b.payload)[0]);
      if (a.label == b.label) {
        intra += c;
        ni += 1;
      } else {
        inter += c;
        ne += 1;
      }
    }
  }
  EXPECT_GT(intra / ni, inter / ne + 0.2);
}

TEST(Generate, SameSeedSameDataset) {
  const Dataset a = generated(small_manifest(9));
  const Dataset b = generated(small_manifest(9));
  ASSERT_EQ(a.sketches.size(), b.sketches.size());
  for (std::size_t i = 0; i < a.sketches.size(); ++i) {
    EXPECT_EQ(a.sketches[i].id, b.sketches[i].id);
    EXPECT_EQ(a.sketches[i].noisy, b.sketches[i].noisy);
    EXPECT_TRUE(bitwise_equal(a.sketches[i].payload, b.sketches[i].payload));
  }
  const Dataset c = generated(small_manifest(10));
  EXPECT_FALSE(bitwise_equal(a.sketches[0].payload, c.sketches[0].payload));
}

TEST(Generate, InfeasiblePrototypesAreReported) {
  Rng rng(1);
  EXPECT_THROW(generate_prototypes(50, 2, rng), std::runtime_error);
}

TEST(Generate, InvalidManifest) {
  Rng rng(1);
  Manifest m = small_manifest();
  m.classes = 1;
  EXPECT_THROW(generate(m, rng), std::invalid_argument);
  m = small_manifest();
  m.noise_frac = 1.5;
  EXPECT_THROW(generate(m, rng), std::invalid_argument);
  m = small_manifest();
  m.dim = 0;
  EXPECT_THROW(generate(m, rng), std::invalid_argument);
}

TEST(Files, SaveLoadRoundTripIsBitwise) {
  test::ScratchDir dir("data_rt");
  const Dataset ds = generated(small_manifest());
  save_dataset(ds, dir.path());
  const Dataset back = load_dataset(dir.path(), true);
  EXPECT_EQ(back.manifest.seed, ds.manifest.seed);
  EXPECT_EQ(back.manifest.noise_frac, ds.manifest.noise_frac);
  ASSERT_EQ(back.sketches.size(), ds.sketches.size());
  ASSERT_EQ(back.shapes.size(), ds.shapes.size());
  for (std::size_t i = 0; i < ds.sketches.size(); ++i) {
    EXPECT_EQ(back.sketches[i].id, ds.sketches[i].id);
    EXPECT_EQ(back.sketches[i].label, ds.sketches[i].label);
    EXPECT_EQ(back.sketches[i].split, ds.sketches[i].split);
    EXPECT_EQ(back.sketches[i].noisy, ds.sketches[i].noisy);
    EXPECT_TRUE(bitwise_equal(back.sketches[i].payload, ds.sketches[i].payload));
  }
  for (std::size_t i = 0; i < ds.shapes.size(); ++i) {
    EXPECT_TRUE(bitwise_equal(back.shapes[i].payload, ds.shapes[i].payload));
  }
  const Dataset blind = load_dataset(dir.path());
  EXPECT_EQ(count_noisy(blind.sketches), 0u);
}

TEST(Files, SameSeedGivesIdenticalFiles) {
  test::ScratchDir a("data_a"), b("data_b");
  save_dataset(generated(small_manifest(3)), a.path());
  save_dataset(generated(small_manifest(3)), b.path());
  for (const char* f : {"manifest.txt", "sketches.csv", "shapes.csv", "noisy.csv"}) {
    EXPECT_EQ(test::slurp(a.file(f)), test::slurp(b.file(f))) << f;
  }
}

TEST(Features, TruncatedRowReportsLine) {
  std::istringstream in(
      "id,label,split,modality,dim=2,views=1\n"
      "a,0,train,sketch,1,2\n"
      "b,1,train,sketch,3\n");
  try {
    read_features(in, "x.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("x.csv:3"), std::string::npos);
  }
}

TEST(Features, HeaderWidthMismatch) {
  std::ostringstream row;
  row << "id,label,split,modality,dim=8,views=1\na,0,train,sketch";
  for (int k = 0; k < 7; ++k) row << ",0.5";
  row << '\n';
  std::istringstream in(row.str());
  EXPECT_THROW(read_features(in, "x.csv"), ParseError);
}

TEST(Features, MalformedFields) {
  const char* bad[] = {
      "id,label,split,modality,dim=1,views=1\na,zero,train,sketch,1\n",
      "id,label,split,modality,dim=1,views=1\na,0,dev,sketch,1\n",
      "id,label,split,modality,dim=1,views=1\na,0,train,mesh,1\n",
      "id,label,split,modality,dim=1,views=1\na,0,train,sketch,nan\n",
      "id,label,split,modality,dim=1,views=1\na,0,train,sketch,1\na,0,train,sketch,2\n",
      "id,label,split,modality,dim=0,views=1\n",
      "id,label,modality,dim=1,views=1\n",
      "",
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    EXPECT_THROW(read_features(in, "x.csv"), ParseError) << text;
  }
}

TEST(Files, ManifestMismatchIsRejected) {
  test::ScratchDir dir("data_mm");
  const Dataset ds = generated(small_manifest());
  save_dataset(ds, dir.path());
  std::string manifest = test::slurp(dir.file("manifest.txt"));
  const auto pos = manifest.find("sketch_train=10");
  ASSERT_NE(pos, std::string::npos);
  manifest.replace(pos, 15, "sketch_train=11");
  test::spit(dir.file("manifest.txt"), manifest);
  EXPECT_THROW(load_dataset(dir.path()), ParseError);
}

TEST(Files, MissingFileIsReported) {
  test::ScratchDir dir("data_missing");
  EXPECT_THROW(load_dataset(dir.path()), std::runtime_error);
}

}  // namespace
}  // namespace uactn
