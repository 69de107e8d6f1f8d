#include "poet/tensor/serialize.hpp"

#include <cstring>
#include <fstream>

#include "poet/error.hpp"

namespace poet {

namespace {

constexpr char kMagic[8] = {'P', 'O', 'E', 'T', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  using U = std::make_unsigned_t<T>;
  U u;
  std::memcpy(&u, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
  }
  put_bytes(os, buf, sizeof(T));
}

void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le(os, bits);
}

void put_f32_le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_le(os, bits);
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) {
    raise(ErrorKind::Parse, std::string("tensor container: truncated ") + what);
  }
}

template <typename T>
T get_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  get_bytes(is, buf, sizeof(T), what);
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<U>(buf[i]) << (8 * i);
  }
  T value;
  std::memcpy(&value, &u, sizeof(T));
  return value;
}

std::string get_string(std::istream& is, const char* what) {
  auto len = get_le<std::uint64_t>(is, what);
  std::string s(len, '\0');
  if (len > 0) get_bytes(is, s.data(), len, what);
  return s;
}

}  // namespace

void save_container(const std::filesystem::path& path, const TensorContainer& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    raise(ErrorKind::Io, "cannot open for writing: " + path.string());
  }
  put_bytes(os, kMagic, sizeof(kMagic));
  put_le(os, kVersion);
  put_le(os, static_cast<std::uint64_t>(c.meta.size()));
  put_bytes(os, c.meta.data(), c.meta.size());
  put_le(os, static_cast<std::uint64_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    put_le(os, static_cast<std::uint64_t>(name.size()));
    put_bytes(os, name.data(), name.size());
    put_le(os, static_cast<std::uint8_t>(t.dtype()));
    put_le(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le(os, static_cast<std::uint64_t>(d));
    if (t.dtype() == DType::f32) {
      for (double v : t.data()) put_f32_le(os, static_cast<float>(v));
    } else {
      for (double v : t.data()) put_f64_le(os, v);
    }
  }
  if (!os) {
    raise(ErrorKind::Io, "write failed: " + path.string());
  }
}

TensorContainer load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    raise(ErrorKind::Io, "cannot open for reading: " + path.string());
  }
  char magic[8];
  get_bytes(is, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    raise(ErrorKind::Version, "not a tensor container: " + path.string());
  }
  auto version = get_le<std::uint32_t>(is, "version");
  if (version != kVersion) {
    raise(ErrorKind::Version, "unsupported tensor container version " +
                                  std::to_string(version) + " in " + path.string());
  }
  TensorContainer c;
  c.meta = get_string(is, "meta");
  auto count = get_le<std::uint64_t>(is, "count");
  c.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(is, "name");
    auto dtype_tag = get_le<std::uint8_t>(is, "dtype");
    if (dtype_tag > 1) {
      raise(ErrorKind::Parse, "tensor container: unknown dtype tag for '" + name + "'");
    }
    DType dtype = dtype_tag == 1 ? DType::f32 : DType::f64;
    auto rank = get_le<std::uint32_t>(is, "rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get_le<std::uint64_t>(is, "dims"));
      n *= d;
    }
    std::vector<double> data(n);
    if (dtype == DType::f32) {
      for (auto& v : data) {
        auto bits = get_le<std::uint32_t>(is, "payload");
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<double>(f);
      }
    } else {
      for (auto& v : data) {
        auto bits = get_le<std::uint64_t>(is, "payload");
        std::memcpy(&v, &bits, 8);
      }
    }
    c.tensors.emplace_back(std::move(name),
                           make_tensor(std::move(shape), std::move(data), false, dtype));
  }
  return c;
}

}  // namespace poet
