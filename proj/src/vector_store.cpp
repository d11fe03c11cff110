#include "rasr/vector_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>

#include <zlib.h>

namespace rasr {

static_assert(std::endian::native == std::endian::little,
              "store format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'A', 'S', 'R', 'V', 'D', 'B', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::string& buf, std::uint64_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 8);
}

void put_str(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

class Reader {
 public:
  Reader(const char* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    take(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (static_cast<std::size_t>(end_ - p_) < n) {
      throw CorruptStoreError("store file truncated inside a string");
    }
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  void floats(float* out, std::size_t n) { take(out, n * sizeof(float)); }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  void take(void* out, std::size_t n) {
    if (static_cast<std::size_t>(end_ - p_) < n) {
      throw CorruptStoreError("store file truncated");
    }
    std::memcpy(out, p_, n);
    p_ += n;
  }
  const char* p_;
  const char* end_;
};

}  // namespace

VectorStore::VectorStore(int dim) : dim_(dim) {
  if (dim < 1) throw Error("store dim must be >= 1");
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t VectorStore::upsert(std::vector<StoreEntry> entries) {
  for (auto& e : entries) {
    if (e.vector.size() != dim_) {
      throw DimensionMismatch("entry '" + e.chunk_id + "' has dim " +
                              std::to_string(e.vector.size()) + ", store dim " +
                              std::to_string(dim_));
    }
    l2_normalize(e.vector);
  }
  std::unique_lock lock(mutex_);
  for (auto& e : entries) {
    auto it = by_chunk_id_.find(e.chunk_id);
    if (it != by_chunk_id_.end()) {
      entries_[it->second] = std::move(e);
    } else {
      by_chunk_id_.emplace(e.chunk_id, entries_.size());
      entries_.push_back(std::move(e));
    }
  }
  return entries.size();
}

std::size_t VectorStore::upsert(StoreEntry entry) {
  std::vector<StoreEntry> one;
  one.push_back(std::move(entry));
  return upsert(std::move(one));
}

std::vector<ScoredChunk> VectorStore::top_k(const EmbeddingVector& query, int k,
                                            const QueryFilter& filter) const {
  if (k < 1) throw Error("k must be >= 1");
  if (query.size() != dim_) {
    throw DimensionMismatch("query dim " + std::to_string(query.size()) +
                            ", store dim " + std::to_string(dim_));
  }
  EmbeddingVector q = query;
  l2_normalize(q);

  std::shared_lock lock(mutex_);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (filter.excludes(entries_[i].talk_id)) continue;
    const double s = std::clamp(stable_dot(entries_[i].vector, q), -1.0, 1.0);
    scored.emplace_back(s, i);
  }
  const std::size_t take = std::min<std::size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    [this](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return entries_[a.second].chunk_id < entries_[b.second].chunk_id;
                    });
  std::vector<ScoredChunk> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({entries_[scored[i].second], scored[i].first});
  }
  return out;
}

std::optional<StoreEntry> VectorStore::get(std::string_view chunk_id) const {
  std::shared_lock lock(mutex_);
  auto it = by_chunk_id_.find(std::string(chunk_id));
  if (it == by_chunk_id_.end()) return std::nullopt;
  return entries_[it->second];
}

std::vector<StoreEntry> VectorStore::eligible_entries(const QueryFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<StoreEntry> out;
  for (const auto& e : entries_) {
    if (!filter.excludes(e.talk_id)) out.push_back(e);
  }
  return out;
}

void VectorStore::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  std::string body;
  put_u32(body, static_cast<std::uint32_t>(dim_));
  put_u64(body, entries_.size());
  for (const auto& e : entries_) {
    put_str(body, e.chunk_id);
    put_str(body, e.talk_id);
    put_str(body, e.text);
    body.append(reinterpret_cast<const char*>(e.vector.data()),
                static_cast<std::size_t>(dim_) * sizeof(float));
  }
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size())));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.write(reinterpret_cast<const char*>(&crc), 4);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());

  if (data.size() < sizeof(kMagic) + 4 + 8 + 4 ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptStoreError("bad magic or file too short: " + path.string());
  }
  const char* body = data.data() + sizeof(kMagic);
  const std::size_t body_size = data.size() - sizeof(kMagic) - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
  const std::uint32_t actual_crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(body), static_cast<uInt>(body_size)));
  if (stored_crc != actual_crc) {
    throw CorruptStoreError("checksum mismatch: " + path.string());
  }

  Reader r(body, body_size);
  const std::uint32_t dim = r.u32();
  if (dim < 1) throw CorruptStoreError("invalid dim in store file");
  const std::uint64_t count = r.u64();

  VectorStore store(static_cast<int>(dim));
  store.entries_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    StoreEntry e;
    e.chunk_id = r.str();
    e.talk_id = r.str();
    e.text = r.str();
    e.vector.resize(dim);
    r.floats(e.vector.data(), dim);
    store.by_chunk_id_.emplace(e.chunk_id, store.entries_.size());
    store.entries_.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw CorruptStoreError("trailing bytes in store file");
  return store;
}

}  // namespace rasr
