#include "msgaf/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace msgaf {

namespace {

constexpr char kMagic[] = {'M', 'S', 'G', 'A', 'F'};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

void put_tensor(std::string& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, 2);
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  for (double v : m.data()) put_f64(out, v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t config_hash(const ModelConfig& model, int percentile) {
  return fnv1a(model.canonical() + ";percentile=" + std::to_string(percentile) + ";schema=" +
               std::string(MetricSchema::kVersion));
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size() + 6));
  for (const auto& t : ckpt.params.tensors()) put_tensor(out, t.name, t.value);
  put_tensor(out, "normalizer.mean", ckpt.normalizer.mean());
  put_tensor(out, "normalizer.std", ckpt.normalizer.stddev());
  put_tensor(out, "meta.target_scale", Matrix(1, 1, ckpt.target_scale));
  put_tensor(out, "meta.seed", Matrix(1, 2, std::vector<double>{static_cast<double>(ckpt.seed >> 32),
                                                                static_cast<double>(ckpt.seed & 0xffffffffULL)}));
  put_tensor(out, "meta.epoch", Matrix(1, 1, static_cast<double>(ckpt.epoch)));
  put_tensor(out, "meta.val_loss", Matrix(1, 1, ckpt.val_loss));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  Matrix mean, stddev;
  bool have_scale = false, have_seed = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank != 2) throw CheckpointError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
      throw CheckpointError("tensor '" + name + "' has invalid shape");
    }
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.get_f64();
    Matrix m(rows, cols, std::move(data));
    if (name == "normalizer.mean") {
      mean = std::move(m);
    } else if (name == "normalizer.std") {
      stddev = std::move(m);
    } else if (name == "meta.target_scale") {
      ckpt.target_scale = m(0, 0);
      have_scale = true;
    } else if (name == "meta.seed") {
      ckpt.seed = (static_cast<std::uint64_t>(m(0, 0)) << 32) | static_cast<std::uint64_t>(m(0, 1));
      have_seed = true;
    } else if (name == "meta.epoch") {
      ckpt.epoch = static_cast<std::size_t>(m(0, 0));
    } else if (name == "meta.val_loss") {
      ckpt.val_loss = m(0, 0);
    } else {
      ckpt.params.add(name, std::move(m));
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint records");
  if (mean.empty() || stddev.empty() || !have_scale || !have_seed) {
    throw CheckpointError("checkpoint is missing normalizer or metadata records");
  }
  ckpt.normalizer = Normalizer(std::move(mean), std::move(stddev));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace msgaf
