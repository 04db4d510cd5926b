#include "shoal/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace shoal {

namespace {

constexpr std::string_view kMagic = "SHOALPOL";

class Writer {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(in_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(in_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorKind::Parse, "checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const PolicyCheckpoint& c) {
  Writer w;
  w.bytes(kMagic);
  w.u32(PolicyCheckpoint::kFormatVersion);
  const std::string text = to_text(c.config);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  const auto& shapes = c.net.shapes();
  w.u32(static_cast<std::uint32_t>(shapes.size()));
  for (const auto& s : shapes) {
    w.u32(s.out);
    w.u32(s.in);
  }
  // The flat parameter vector is already layer-major with row-major weights.
  for (Eigen::Index i = 0; i < c.net.params().size(); ++i) w.f64(c.net.params()(i));
  w.u32(static_cast<std::uint32_t>(c.curve.size()));
  for (const auto& p : c.curve) {
    w.u64(p.step);
    w.f64(p.r_bar);
  }
  w.u64(fnv1a64(w.str()));
  return std::move(w.str());
}

PolicyCheckpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic) fail(ErrorKind::Parse, "not a policy checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != PolicyCheckpoint::kFormatVersion)
    fail(ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(version));
  PolicyCheckpoint c;
  const auto text_len = r.u32();
  c.config = parse_config(r.bytes(text_len));
  const auto n_layers = r.u32();
  if (n_layers < 3 || n_layers > 64) fail(ErrorKind::Parse, "checkpoint layer count out of range");
  std::vector<LayerShape> shapes(n_layers);
  std::size_t n_params = 0;
  for (auto& s : shapes) {
    s.out = r.u32();
    s.in = r.u32();
    n_params += std::size_t{s.out} * s.in + s.out;
  }
  if (n_params > (bytes.size() - r.pos()) / 8) fail(ErrorKind::Parse, "checkpoint truncated in weights");
  Eigen::VectorXd params(static_cast<Eigen::Index>(n_params));
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = r.f64();
  c.net = Mlp(std::move(shapes), std::move(params));
  const auto n_curve = r.u32();
  for (std::uint32_t i = 0; i < n_curve; ++i) {
    CurvePoint p;
    p.step = r.u64();
    p.r_bar = r.f64();
    c.curve.push_back(p);
  }
  const std::size_t body_len = r.pos();
  const auto checksum = r.u64();
  if (checksum != fnv1a64(bytes.substr(0, body_len))) fail(ErrorKind::Parse, "checkpoint checksum mismatch");
  if (!r.done()) fail(ErrorKind::Parse, "trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write checkpoint '" + path.string() + "'");
  const auto bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint '" + path.string() + "'");
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::uint64_t checkpoint_digest(const PolicyCheckpoint& ckpt) { return fnv1a64(serialize_checkpoint(ckpt)); }

}  // namespace shoal
