#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "agedg/backbone.hpp"

namespace agedg::backbone {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are written in host order, which must be little-endian");

namespace {

constexpr char kMagic[8] = {'A', 'G', 'D', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u64(std::size_t v) { pod(static_cast<std::uint64_t>(v)); }
  void sizes(const std::vector<std::size_t>& v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }
  void reals(const std::vector<double>& v) {
    u64(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t u64() { return static_cast<std::size_t>(pod<std::uint64_t>()); }
  std::vector<std::size_t> sizes() {
    const auto n = u64();
    if (n > 1024) throw DataError("checkpoint: implausible layer count");
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = u64();
    return v;
  }
  std::vector<double> reals() {
    const auto n = u64();
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw DataError("checkpoint: trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint: truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelState& state) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod(kVersion);
  w.pod(static_cast<std::uint32_t>(state.arch.input.mode));
  w.u64(state.arch.input.height);
  w.u64(state.arch.input.width);
  w.u64(state.arch.input.channels);
  w.u64(state.arch.feature_dim);
  w.sizes(state.arch.hidden);
  w.pod(static_cast<std::uint64_t>(state.seed));
  w.reals(state.theta);
  w.reals(state.theta_prime);
  w.pod(static_cast<std::uint8_t>(state.auxiliary ? 1 : 0));
  if (state.auxiliary) {
    w.sizes(state.auxiliary->hidden);
    w.u64(state.auxiliary->input_dim);
    w.u64(state.auxiliary->num_domains);
    w.reals(state.auxiliary->params);
  }
  return w.take();
}

ModelState deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file");
  }
  Reader r(bytes.substr(sizeof(kMagic)));
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kVersion) + ")");
  }
  ModelState s;
  const auto mode = r.pod<std::uint32_t>();
  if (mode > 1) throw DataError("checkpoint: unknown input mode");
  s.arch.input.mode = static_cast<InputMode>(mode);
  s.arch.input.height = r.u64();
  s.arch.input.width = r.u64();
  s.arch.input.channels = r.u64();
  s.arch.feature_dim = r.u64();
  s.arch.hidden = r.sizes();
  s.seed = r.pod<std::uint64_t>();
  s.theta = r.reals();
  s.theta_prime = r.reals();
  if (r.pod<std::uint8_t>() != 0) {
    DiscriminatorState d;
    d.hidden = r.sizes();
    d.input_dim = r.u64();
    d.num_domains = r.u64();
    d.params = r.reals();
    if (d.params.size() != discriminator_layout(d).parameter_count()) {
      throw DataError("checkpoint: discriminator parameter count mismatch");
    }
    s.auxiliary = std::move(d);
  }
  r.expect_end();
  s.arch.validate();
  if (s.theta.size() != s.arch.extractor_parameter_count() ||
      s.theta_prime.size() != s.arch.classifier_parameter_count()) {
    throw DataError("checkpoint: parameter counts do not match the architecture");
  }
  return s;
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const auto bytes = serialize_checkpoint(state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace agedg::backbone
