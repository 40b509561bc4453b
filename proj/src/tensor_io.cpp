#include "lincirc/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <thread>

#include "lincirc/util.hpp"

extern "C" void openblas_set_num_threads(int);

namespace lincirc {

int thread_budget() {
  if (const char* env = std::getenv("LINCIRC_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_blas_threads(int n) { openblas_set_num_threads(n < 1 ? 1 : n); }

namespace {

static_assert(sizeof(float) == 4, "f32 payload assumed");

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) fail("io-error", "archive truncated");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::uint32_t f32_bits(float f) {
  std::uint32_t b;
  std::memcpy(&b, &f, 4);
  return b;
}

float bits_f32(std::uint32_t b) {
  float f;
  std::memcpy(&f, &b, 4);
  return f;
}

}  // namespace

void save_archive(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::string out;
  out += "LCGT";
  put_u8(out, 1);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    if (nt.name.size() > 0xffff) fail("io-error", "tensor name too long: " + nt.name);
    put_u16(out, static_cast<std::uint16_t>(nt.name.size()));
    out += nt.name;
    put_u8(out, 0);  // dtype f32
    put_u8(out, static_cast<std::uint8_t>(nt.tensor.rank()));
    for (int d : nt.tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : nt.tensor.data) put_u32(out, f32_bits(v));
  }
  write_text_file(path, out);
}

std::vector<NamedTensor> load_archive(const std::string& path) {
  std::string buf = read_text_file(path);
  Reader r(buf);
  std::string magic = r.bytes(4);
  if (magic != "LCGT") fail("io-error", "bad archive magic in " + path);
  std::uint8_t version = r.u8();
  if (version != 1) fail("io-error", "unsupported archive version " + std::to_string(version));
  std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint16_t name_len = r.u16();
    std::string name = r.bytes(name_len);
    std::uint8_t dtype = r.u8();
    if (dtype != 0) fail("io-error", "unsupported dtype code " + std::to_string(dtype));
    std::uint8_t rank = r.u8();
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) shape[i] = static_cast<int>(r.u32());
    std::int64_t n = shape_numel(shape);
    std::vector<float> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = bits_f32(r.u32());
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (r.pos != buf.size()) fail("io-error", "trailing bytes in archive " + path);
  return out;
}

const Tensor& archive_get(const std::vector<NamedTensor>& ar, const std::string& name) {
  for (const auto& nt : ar)
    if (nt.name == name) return nt.tensor;
  fail("io-error", "archive missing tensor: " + name);
}

bool archive_has(const std::vector<NamedTensor>& ar, const std::string& name) {
  for (const auto& nt : ar)
    if (nt.name == name) return true;
  return false;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("io-error", "cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) fail("io-error", "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("io-error", "cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

std::uint64_t file_fnv64(const std::string& path) {
  std::string s = read_text_file(path);
  return fnv1a64(s.data(), s.size());
}

}  // namespace lincirc
