#include "v2s/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "v2s/errors.hpp"
#include "v2s/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "container io assumes a little-endian host");

namespace v2s {

void Container::set_int(const std::string& name, std::int64_t v) {
  for (auto& [n, x] : int_meta)
    if (n == name) {
      x = v;
      return;
    }
  int_meta.emplace_back(name, v);
}

void Container::set_double(const std::string& name, double v) {
  for (auto& [n, x] : double_meta)
    if (n == name) {
      x = v;
      return;
    }
  double_meta.emplace_back(name, v);
}

bool Container::has_int(const std::string& name) const {
  for (const auto& [n, _] : int_meta)
    if (n == name) return true;
  return false;
}

std::int64_t Container::get_int(const std::string& name) const {
  for (const auto& [n, x] : int_meta)
    if (n == name) return x;
  throw CorruptFileError("container missing int field: " + name);
}

double Container::get_double(const std::string& name) const {
  for (const auto& [n, x] : double_meta)
    if (n == name) return x;
  throw CorruptFileError("container missing double field: " + name);
}

const TensorEntry& Container::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CorruptFileError("container missing tensor: " + name);
}

namespace {

const char* magic_of(ContainerKind k) {
  return k == ContainerKind::kModel ? "V2SM" : "V2ST";
}

void put_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
void put_u32(std::string& out, std::uint32_t v) { put_raw(out, &v, 4); }
void put_i64(std::string& out, std::int64_t v) { put_raw(out, &v, 8); }
void put_f64(std::string& out, double v) { put_raw(out, &v, 8); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_raw(out, s.data(), s.size());
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw CorruptFileError("container truncated while reading");
  }
  void get_raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t get_u32() {
    std::uint32_t v;
    get_raw(&v, 4);
    return v;
  }
  std::int64_t get_i64() {
    std::int64_t v;
    get_raw(&v, 8);
    return v;
  }
  double get_f64() {
    double v;
    get_raw(&v, 8);
    return v;
  }
  std::string get_str() {
    const std::uint32_t n = get_u32();
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_container(const Container& c, const std::string& path) {
  std::string buf;
  put_raw(buf, magic_of(c.kind), 4);
  put_u32(buf, kContainerVersion);

  put_u32(buf, static_cast<std::uint32_t>(c.int_meta.size()));
  for (const auto& [n, v] : c.int_meta) {
    put_str(buf, n);
    put_i64(buf, v);
  }
  put_u32(buf, static_cast<std::uint32_t>(c.double_meta.size()));
  for (const auto& [n, v] : c.double_meta) {
    put_str(buf, n);
    put_f64(buf, v);
  }
  put_u32(buf, static_cast<std::uint32_t>(c.label_lists.size()));
  for (const auto& list : c.label_lists) {
    put_u32(buf, static_cast<std::uint32_t>(list.size()));
    for (std::uint32_t v : list) put_u32(buf, v);
  }
  put_u32(buf, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    put_str(buf, t.name);
    put_str(buf, t.kind);
    put_u32(buf, static_cast<std::uint32_t>(t.data.rank()));
    for (std::size_t d = 0; d < t.data.rank(); ++d)
      put_u32(buf, static_cast<std::uint32_t>(t.data.dim(d)));
  }
  for (const auto& t : c.tensors)
    put_raw(buf, t.data.data(), t.data.size() * sizeof(double));

  const std::uint64_t sum = fnv1a64(buf.data(), buf.size());
  put_raw(buf, &sum, 8);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("write failed: " + path);
}

Container load_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 16) throw CorruptFileError("container too short: " + path);
  Cursor cur{buf};

  char magic[4];
  cur.get_raw(magic, 4);
  Container c;
  if (std::memcmp(magic, "V2SM", 4) == 0)
    c.kind = ContainerKind::kModel;
  else if (std::memcmp(magic, "V2ST", 4) == 0)
    c.kind = ContainerKind::kTheta;
  else
    throw CorruptFileError("bad magic in " + path);

  const std::uint32_t version = cur.get_u32();
  if (version != kContainerVersion)
    throw UnsupportedVersionError("container version " +
                                  std::to_string(version) + " (want 1)");

  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a64(buf.data(), buf.size() - 8) != stored)
    throw CorruptFileError("checksum mismatch in " + path);

  const std::uint32_t n_int = cur.get_u32();
  for (std::uint32_t i = 0; i < n_int; ++i) {
    std::string name = cur.get_str();
    c.int_meta.emplace_back(std::move(name), cur.get_i64());
  }
  const std::uint32_t n_dbl = cur.get_u32();
  for (std::uint32_t i = 0; i < n_dbl; ++i) {
    std::string name = cur.get_str();
    c.double_meta.emplace_back(std::move(name), cur.get_f64());
  }
  const std::uint32_t n_lists = cur.get_u32();
  for (std::uint32_t i = 0; i < n_lists; ++i) {
    const std::uint32_t len = cur.get_u32();
    std::vector<std::uint32_t> list(len);
    for (auto& v : list) v = cur.get_u32();
    c.label_lists.push_back(std::move(list));
  }
  const std::uint32_t n_tensors = cur.get_u32();
  std::vector<std::vector<std::size_t>> shapes;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorEntry e;
    e.name = cur.get_str();
    e.kind = cur.get_str();
    const std::uint32_t rank = cur.get_u32();
    if (rank > 3) throw CorruptFileError("tensor rank > 3 in " + path);
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = cur.get_u32();
    shapes.push_back(dims);
    c.tensors.push_back(std::move(e));
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::size_t n = 1;
    for (auto d : shapes[i]) n *= d;
    std::vector<double> data(n);
    cur.get_raw(data.data(), n * sizeof(double));
    c.tensors[i].data = Tensor(shapes[i], std::move(data));
  }
  if (cur.pos != buf.size() - 8)
    throw CorruptFileError("trailing bytes in " + path);
  return c;
}

}  // namespace v2s
