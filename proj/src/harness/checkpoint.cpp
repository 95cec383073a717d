#include "disc/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "disc/errors.hpp"

namespace disc::harness {

namespace {

template <typename U> void put(std::string &out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_string(std::string &out, const std::string &s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  template <typename U> U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string &bytes_;
  std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Checkpoint &ck) {
  std::string out = "DISC";
  put<std::uint16_t>(out, kCheckpointVersion);
  put_string(out, net::netspec_to_text(ck.spec));
  put<std::uint32_t>(out, ck.epoch);
  put<std::uint64_t>(out, ck.seed);
  put<std::uint64_t>(out, ck.config_digest);
  const auto &entries = ck.params.entries();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto &[name, t] : entries) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape())
      put<std::uint64_t>(out, d);
    for (float v : t.values())
      put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string &bytes) {
  if (bytes.size() < 6 || bytes.compare(0, 4, "DISC") != 0)
    throw DataError("not a checkpoint (bad magic)");
  Reader in(bytes);
  in.get<std::uint32_t>();
  const auto version = in.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.spec = net::netspec_from_text(in.get_string());
  } catch (const ConfigError &e) {
    throw DataError(std::string("checkpoint model description: ") + e.what());
  }
  ck.epoch = in.get<std::uint32_t>();
  ck.seed = in.get<std::uint64_t>();
  ck.config_digest = in.get<std::uint64_t>();

  const auto expected = net::parameter_shapes(ck.spec);
  const auto count = in.get<std::uint32_t>();
  if (count != expected.size())
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                    std::to_string(expected.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = in.get_string();
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8)
      throw DataError("tensor " + name + " has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto &d : shape)
      d = in.get<std::uint64_t>();
    if (name != expected[i].first || shape != expected[i].second)
      throw DataError("checkpoint tensor " + std::to_string(i) + " is " + name + " " + to_string(shape) +
                      ", model expects " + expected[i].first + " " + to_string(expected[i].second));
    Tensor<float> t(shape);
    for (auto &v : t.values())
      v = std::bit_cast<float>(in.get<std::uint32_t>());
    ck.params.add(std::move(name), std::move(t));
  }
  if (!in.done())
    throw DataError("trailing bytes after checkpoint tensors");
  ck.params.seed = ck.seed;
  return ck;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  // Write then rename so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return decode_checkpoint(buf.str());
  } catch (const DataError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

} // namespace disc::harness
