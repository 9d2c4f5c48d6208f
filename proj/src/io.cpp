#include "coal/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdlib>
#include <limits>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "coal/errors.hpp"

namespace coal {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw LengthError(path.string() + ": truncated header (" + std::to_string(bytes.size()) +
                      " bytes)");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::string hex_u32(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);
  const std::uint32_t img_magic = read_be32(img, 0, images);
  if (img_magic != kIdxImageMagic) {
    throw FormatError(images.string() + ": bad magic " + hex_u32(img_magic) + ", expected " +
                      hex_u32(kIdxImageMagic));
  }
  const std::uint32_t lab_magic = read_be32(lab, 0, labels);
  if (lab_magic != kIdxLabelMagic) {
    throw FormatError(labels.string() + ": bad magic " + hex_u32(lab_magic) + ", expected " +
                      hex_u32(kIdxLabelMagic));
  }
  const std::uint32_t n = read_be32(img, 4, images);
  const std::uint32_t rows = read_be32(img, 8, images);
  const std::uint32_t cols = read_be32(img, 12, images);
  const std::uint32_t n_labels = read_be32(lab, 4, labels);
  if (n != n_labels) {
    throw ConsistencyError(images.string() + " holds " + std::to_string(n) + " images but " +
                           labels.string() + " holds " + std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = std::size_t{rows} * cols;
  if (img.size() < 16 + std::size_t{n} * pixels) {
    throw LengthError(images.string() + ": expected " + std::to_string(16 + std::size_t{n} * pixels) +
                      " bytes, found " + std::to_string(img.size()));
  }
  if (lab.size() < 8 + std::size_t{n}) {
    throw LengthError(labels.string() + ": expected " + std::to_string(8 + std::size_t{n}) +
                      " bytes, found " + std::to_string(lab.size()));
  }
  LabeledDataset ds;
  ds.features = Tensor2(n, pixels);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < std::size_t{n} * pixels; ++i) ds.features.data()[i] = img[16 + i] / 255.0;
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = num_classes > 0 ? num_classes : static_cast<std::size_t>(max_label + 1);
  ds.provenance = "idx:" + images.filename().string();
  ds.validate();
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const LabeledDataset& dataset, std::uint32_t image_rows, std::uint32_t image_cols) {
  if (dataset.features.cols() != std::size_t{image_rows} * image_cols) {
    throw DimensionError("write_idx: " + dataset.features.shape_string() + " is not " +
                         std::to_string(image_rows) + "x" + std::to_string(image_cols) + " images");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write IDX files");
  const auto n = static_cast<std::uint32_t>(dataset.size());
  put_be32(img, kIdxImageMagic);
  put_be32(img, n);
  put_be32(img, image_rows);
  put_be32(img, image_cols);
  for (double v : dataset.features.data()) {
    const long byte = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    img.put(static_cast<char>(byte));
  }
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, n);
  for (int y : dataset.labels) lab.put(static_cast<char>(y));
}

namespace {

bool parse_full(const std::string& cell, double& out) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  while (*end == ' ') ++end;
  return end != begin && *end == '\0' && errno == 0;
}

bool parse_full(const std::string& cell, long long& out) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(begin, &end, 10);
  while (*end == ' ') ++end;
  return end != begin && *end == '\0' && errno == 0;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": need features and a label");
    if (width == 0) width = cells.size() - 1;
    if (cells.size() - 1 != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(width + 1) + " columns, found " + std::to_string(cells.size()));
    }
    const auto bad = [&](const std::string& cell) {
      return FormatError(path.string() + ":" + std::to_string(line_no) + ": unparsable value '" + cell + "'");
    };
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_full(cells[j], v)) throw bad(cells[j]);
      values.push_back(v);
    }
    long long y = 0;
    if (!parse_full(cells.back(), y) || y < 0 || y > std::numeric_limits<int>::max()) throw bad(cells.back());
    labels.push_back(static_cast<int>(y));
  }
  LabeledDataset ds;
  ds.features = Tensor2(labels.size(), width, std::move(values));
  ds.labels = std::move(labels);
  int max_label = -1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = num_classes > 0 ? num_classes : static_cast<std::size_t>(max_label + 1);
  ds.provenance = "csv:" + path.filename().string();
  ds.validate();
  return ds;
}

void write_csv(const std::filesystem::path& path, const LabeledDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t j = 0; j < dataset.features.cols(); ++j) out << 'x' << j << ',';
  out << "label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.features.row(i)) out << v << ',';
    out << dataset.labels[i] << '\n';
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw IoError("sha256 failed for " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace coal
