#include "clarigen/numerics/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "clarigen/error.h"

namespace clarigen::numerics {
namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("truncated checkpoint " + source_);
    }
  }

  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::string out(kCheckpointMagic, kMagicLen);
  for (const Parameter& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_u64(out, d);
    for (double v : p.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());
  if (r.take(kMagicLen) != std::string(kCheckpointMagic, kMagicLen)) {
    throw ParseError("bad checkpoint magic in " + path.string());
  }
  std::vector<std::pair<std::string, Tensor>> records;
  while (!r.done()) {
    const auto name_len = r.uint(4);
    std::string name = r.take(name_len);
    const auto rank = r.uint(4);
    if (rank == 0 || rank > 8) throw ParseError("bad rank for " + name + " in " + path.string());
    Shape shape;
    std::size_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(r.uint(8));
      if (shape.back() == 0 || shape.back() > (std::uint64_t{1} << 32)) {
        throw ParseError("bad extent for " + name + " in " + path.string());
      }
      count *= shape.back();
    }
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(r.uint(8));
    records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return records;
}

void load_checkpoint(ParameterSet& params, const std::filesystem::path& path) {
  auto records = read_checkpoint(path);
  if (records.size() != params.size()) {
    throw ContractError("checkpoint " + path.string() + " has " +
                        std::to_string(records.size()) + " parameters, model expects " +
                        std::to_string(params.size()));
  }
  for (const auto& [name, value] : records) {
    auto id = params.find(name);
    if (!id) throw ContractError("checkpoint " + path.string() + " has unknown parameter " + name);
    if (params[*id].value.shape() != value.shape()) {
      throw ContractError("checkpoint " + path.string() + ": parameter " + name + " has shape " +
                          shape_string(value.shape()) + ", model expects " +
                          shape_string(params[*id].value.shape()));
    }
  }
  for (auto& [name, value] : records) {
    Parameter& p = params.get(name);
    p.value = std::move(value);
    p.grad.fill(0.0);
    p.has_grad = false;
  }
}

}  // namespace clarigen::numerics
