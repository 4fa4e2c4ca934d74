#include "cycflow/checkpoint.hpp"

#include "cycflow/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cycflow {

namespace {

constexpr char kMagic[8] = {'C', 'Y', 'C', 'F', 'L', 'O', 'W', '\0'};

class Writer {
 public:
  void bytes(const void* data, std::size_t size) { out_.append(static_cast<const char*>(data), size); }

  template <typename T>
  void le(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
    }
  }

  void f64(double value) { le(std::bit_cast<std::uint64_t>(value)); }

  void str(std::string_view s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t size) {
    if (pos_ + size > in_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    auto view = in_.substr(pos_, size);
    pos_ += size;
    return view;
  }

  template <typename T>
  T le() {
    auto raw = bytes(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    }
    return static_cast<T>(v);
  }

  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  std::string str() {
    const auto len = le<std::uint32_t>();
    return std::string(bytes(len));
  }

  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig& cfg = ckpt.params.config;
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le(kCheckpointVersion);
  for (int v : {cfg.dim, cfg.layers, cfg.heads, cfg.ff_mult, cfg.t_dim}) w.le(static_cast<std::uint32_t>(v));
  w.le(cfg.seed);
  w.str(ckpt.meta.objective);
  w.le(ckpt.meta.epochs);
  w.f64(ckpt.meta.final_loss);
  w.str(ckpt.meta.dataset_fingerprint);

  std::uint32_t count = 0;
  ckpt.params.for_each([&](const std::string&, const Eigen::MatrixXd&) { ++count; });
  w.le(count);
  ckpt.params.for_each([&](const std::string& name, const Eigen::MatrixXd& t) {
    w.str(name);
    w.le(static_cast<std::uint32_t>(t.rows()));
    w.le(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) w.f64(t(i, j));
    }
  });
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.bytes(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a cycflow checkpoint (bad magic)");
  }
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.dim = static_cast<int>(r.le<std::uint32_t>());
  cfg.layers = static_cast<int>(r.le<std::uint32_t>());
  cfg.heads = static_cast<int>(r.le<std::uint32_t>());
  cfg.ff_mult = static_cast<int>(r.le<std::uint32_t>());
  cfg.t_dim = static_cast<int>(r.le<std::uint32_t>());
  cfg.seed = r.le<std::uint64_t>();

  Checkpoint ckpt;
  ckpt.meta.objective = r.str();
  ckpt.meta.epochs = r.le<std::int64_t>();
  ckpt.meta.final_loss = r.f64();
  ckpt.meta.dataset_fingerprint = r.str();

  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("checkpoint has invalid config: ") + e.what());
  }
  ckpt.params = init_params(cfg).zeros_like();
  const auto count = r.le<std::uint32_t>();
  std::uint32_t expected = 0;
  ckpt.params.for_each([&](const std::string&, const Eigen::MatrixXd&) { ++expected; });
  if (count != expected) {
    throw DataError("checkpoint lists " + std::to_string(count) + " tensors, config implies " +
                    std::to_string(expected));
  }
  ckpt.params.for_each([&](const std::string& name, Eigen::MatrixXd& t) {
    const std::string stored = r.str();
    const auto rows = r.le<std::uint32_t>();
    const auto cols = r.le<std::uint32_t>();
    if (stored != name || rows != t.rows() || cols != t.cols()) {
      std::ostringstream msg;
      msg << "checkpoint tensor '" << stored << "' [" << rows << "x" << cols << "] does not match expected '"
          << name << "' [" << t.rows() << "x" << t.cols() << "]";
      throw DataError(msg.str());
    }
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = r.f64();
    }
  });
  if (!r.done()) throw DataError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace cycflow
