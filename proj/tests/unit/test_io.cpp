#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "coal/errors.hpp"
#include "coal/io.hpp"

using namespace coal;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("coal_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Two 28x28 images; image 0 has pixel (0,0) = 255, image 1 pixel (27,27) = 51.
std::vector<unsigned char> image_fixture(std::uint32_t magic = kIdxImageMagic, std::uint32_t count = 2) {
  std::vector<unsigned char> b;
  put_u32(b, magic);
  put_u32(b, count);
  put_u32(b, 28);
  put_u32(b, 28);
  std::vector<unsigned char> px(2 * 784, 0);
  px[0] = 255;
  px[784 + 783] = 51;
  b.insert(b.end(), px.begin(), px.end());
  return b;
}

std::vector<unsigned char> label_fixture(std::vector<unsigned char> labels) {
  std::vector<unsigned char> b;
  put_u32(b, kIdxLabelMagic);
  put_u32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

}  // namespace

using Idx = TempDir;
using Csv = TempDir;
using Files = TempDir;

TEST_F(Idx, HandCraftedFixture) {
  write_bytes(dir_ / "img", image_fixture());
  write_bytes(dir_ / "lab", label_fixture({3, 7}));
  const LabeledDataset ds = load_idx(dir_ / "img", dir_ / "lab");
  EXPECT_EQ(ds.features.rows(), 2u);
  EXPECT_EQ(ds.features.cols(), 784u);
  EXPECT_EQ(ds.labels, (std::vector<int>{3, 7}));
  EXPECT_EQ(ds.num_classes, 8u);
  EXPECT_EQ(ds.features(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ds.features(1, 783), 0.2);
  EXPECT_EQ(ds.features(0, 1), 0.0);
}

TEST_F(Idx, WrongMagicIsFormatError) {
  write_bytes(dir_ / "img", image_fixture(0x00000802));
  write_bytes(dir_ / "lab", label_fixture({3, 7}));
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab"), FormatError);
  write_bytes(dir_ / "img", image_fixture());
  write_bytes(dir_ / "lab", image_fixture());
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab"), FormatError);
}

TEST_F(Idx, CountMismatchIsConsistencyError) {
  write_bytes(dir_ / "img", image_fixture());
  write_bytes(dir_ / "lab", label_fixture({3, 7, 1}));
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab"), ConsistencyError);
}

TEST_F(Idx, TruncatedFileIsLengthError) {
  auto img = image_fixture();
  img.resize(img.size() - 10);
  write_bytes(dir_ / "img", img);
  write_bytes(dir_ / "lab", label_fixture({3, 7}));
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab"), LengthError);
  write_bytes(dir_ / "img", {0, 0, 8});
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab"), LengthError);
}

TEST_F(Idx, MissingFileIsIoError) {
  EXPECT_THROW(load_idx(dir_ / "nope", dir_ / "nope2"), IoError);
}

TEST_F(Idx, RoundTripIsByteExact) {
  const auto img = image_fixture();
  const auto lab = label_fixture({3, 7});
  write_bytes(dir_ / "img", img);
  write_bytes(dir_ / "lab", lab);
  const LabeledDataset ds = load_idx(dir_ / "img", dir_ / "lab");
  write_idx(dir_ / "img2", dir_ / "lab2", ds, 28, 28);
  EXPECT_EQ(read_bytes(dir_ / "img2"), img);
  EXPECT_EQ(read_bytes(dir_ / "lab2"), lab);
}

TEST_F(Csv, RoundTripKeepsEveryBit) {
  LabeledDataset ds;
  ds.features = Tensor2::from_rows({{0.1, -2.5e-7}, {1.0 / 3.0, 12345.678901234567}});
  ds.labels = {1, 0};
  ds.num_classes = 2;
  write_csv(dir_ / "d.csv", ds);
  const LabeledDataset back = load_csv(dir_ / "d.csv");
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(read_text(dir_ / "d.csv").substr(0, 11), "x0,x1,label");
}

TEST_F(Csv, RaggedRowIsFormatError) {
  write_text(dir_ / "d.csv", "x0,x1,label\n1,2,0\n3,1\n");
  EXPECT_THROW(load_csv(dir_ / "d.csv"), FormatError);
}

TEST_F(Csv, NonNumericIsFormatError) {
  write_text(dir_ / "d.csv", "x0,label\nabc,0\n");
  EXPECT_THROW(load_csv(dir_ / "d.csv"), FormatError);
  write_text(dir_ / "d.csv", "x0,label\n1.0,0.5\n");
  EXPECT_THROW(load_csv(dir_ / "d.csv"), FormatError);
}

TEST_F(Csv, DeclaredClassCountChecksLabels) {
  write_text(dir_ / "d.csv", "x0,label\n1.0,3\n");
  EXPECT_THROW(load_csv(dir_ / "d.csv", 2), IndexError);
  EXPECT_EQ(load_csv(dir_ / "d.csv", 5).num_classes, 5u);
}

TEST_F(Files, Sha256KnownVector) {
  write_text(dir_ / "abc", "abc");
  EXPECT_EQ(sha256_file(dir_ / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  write_text(dir_ / "empty", "");
  EXPECT_EQ(sha256_file(dir_ / "empty"), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_F(Files, WriteTextCreatesParents) {
  write_text(dir_ / "a" / "b" / "c.txt", "hello");
  EXPECT_EQ(read_text(dir_ / "a" / "b" / "c.txt"), "hello");
}
