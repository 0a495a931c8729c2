#include "cfsl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cfsl/error.hpp"

namespace cfsl {

namespace {

constexpr char kMagic[4] = {'C', '2', 'V', '1'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t x) { bytes.push_back(x); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void i64(std::int64_t x) { u64(static_cast<std::uint64_t>(x)); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void matrix(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  void vector(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return x;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t len = u32();
    need(len);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
  Vector vector(Eigen::Index size) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = f64();
    return v;
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw IoError("corrupt checkpoint: " + path_);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("corrupt checkpoint: " + path_);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const TrainedModel& model) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(model.encoder.input_dim()));
  w.u32(static_cast<std::uint32_t>(model.encoder.output_dim()));
  w.u32(static_cast<std::uint32_t>(model.nca.projection.rows()));
  w.u32(static_cast<std::uint32_t>(model.nca.projection.cols()));
  w.u64(static_cast<std::uint64_t>(model.vocab.size()));
  w.u64(static_cast<std::uint64_t>(model.class_names.size()));

  for (TokenId id = 1; id <= model.vocab.size(); ++id) {
    w.str(model.vocab.token_of(id));
    w.i64(model.vocab.count_of(id));
  }
  for (std::size_t i = 0; i < model.class_names.size(); ++i) {
    w.str(model.class_names[i]);
    w.u8(static_cast<std::uint8_t>(model.class_origins[i]));
  }
  w.matrix(model.encoder.token_embeddings);
  w.matrix(model.encoder.projection);
  w.vector(model.encoder.bias);
  w.matrix(model.categories.rows());
  w.matrix(model.nca.projection);
  w.str(model.config_fingerprint);
  w.u64(model.loss_trajectory.size());
  for (double x : model.loss_trajectory) w.f64(x);
  return w.bytes;
}

namespace {

TrainedModel deserialize_impl(const std::vector<std::uint8_t>& bytes,
                              const std::string& path) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a checkpoint: " + path);
  Reader r(bytes, path);
  for (int i = 0; i < 4; ++i) r.u8();
  std::uint8_t version = r.u8();
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  const auto embed_dim = static_cast<Eigen::Index>(r.u32());
  const auto output_dim = static_cast<Eigen::Index>(r.u32());
  const auto nca_rows = static_cast<Eigen::Index>(r.u32());
  const auto nca_cols = static_cast<Eigen::Index>(r.u32());
  const auto vocab_size = static_cast<Eigen::Index>(r.u64());
  const auto n_classes = static_cast<Eigen::Index>(r.u64());

  TrainedModel model;
  for (Eigen::Index i = 0; i < vocab_size; ++i) {
    std::string token = r.str();
    std::int64_t count = r.i64();
    model.vocab.add(std::move(token), count);
  }
  for (Eigen::Index i = 0; i < n_classes; ++i) {
    model.class_names.push_back(r.str());
    model.class_origins.push_back(static_cast<Origin>(r.u8()));
  }
  model.encoder.token_embeddings = r.matrix(vocab_size + 1, embed_dim);
  model.encoder.projection = r.matrix(output_dim, embed_dim);
  model.encoder.bias = r.vector(output_dim);
  model.categories.rows() = r.matrix(n_classes, output_dim);
  model.nca.projection = r.matrix(nca_rows, nca_cols);
  model.config_fingerprint = r.str();
  const auto n_losses = r.u64();
  for (std::uint64_t i = 0; i < n_losses; ++i) model.loss_trajectory.push_back(r.f64());
  r.expect_end();
  return model;
}

}  // namespace

TrainedModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  return deserialize_impl(bytes, "<memory>");
}

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_impl(bytes, path);
}

}  // namespace cfsl
