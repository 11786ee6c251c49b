#include "pcagan/datakit.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "pcagan/errors.hpp"
#include "pcagan/rng.hpp"

namespace pcagan {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'C', 'A', 'G', 'D', 'S', 'E', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}

void put_doubles(std::string& out, const Mat<double>& m) {
  for (Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

Mat<double> get_doubles(const unsigned char*& p, Index rows, Index cols) {
  Mat<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i, p += 8) m.data()[i] = std::bit_cast<double>(get_u64(p));
  return m;
}

std::uint64_t hash_doubles(const Mat<double>& m, std::uint64_t h) {
  std::string bytes;
  put_doubles(bytes, m);
  return fnv1a(bytes.data(), bytes.size(), h);
}

}  // namespace

bool operator==(const DatasetHandle& a, const DatasetHandle& b) {
  const auto same = [](const Mat<double>& x, const Mat<double>& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
  };
  return a.seed == b.seed && a.counts == b.counts && same(a.prior.mean, b.prior.mean) &&
         same(a.prior.eigvals, b.prior.eigvals) && same(a.prior.eigvecs, b.prior.eigvecs) &&
         (a.mm.mask == b.mm.mask).all() && a.mm.noise_var == b.mm.noise_var && same(a.train.xs, b.train.xs) &&
         same(a.train.ys, b.train.ys) && same(a.val.xs, b.val.xs) && same(a.val.ys, b.val.ys) &&
         same(a.test.xs, b.test.xs) && same(a.test.ys, b.test.ys);
}

GaussianPrior<double> prior_for(const TrainConfig& c) {
  if (c.d % 10 == 0 && c.d <= c.d_max)
    return make_prior_chain<double>(c.d_max, c.prior_seed)[static_cast<std::size_t>(c.d / 10 - 1)];
  return make_prior<double>(c.d, c.prior_seed);
}

MeasurementModel<double> measurement_for(const TrainConfig& c) {
  return MeasurementModel<double>::masked_even(c.d, c.noise_var, c.mask);
}

Split generate_pairs(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm, std::uint64_t seed,
                     Index first, Index count) {
  require(first >= 0 && count >= 0, "pair range must be nonnegative");
  Split s{Mat<double>(prior.dim(), count), Mat<double>(prior.dim(), count)};
  for (Index i = 0; i < count; ++i) {
    RngStream rng(seed, StreamTag::kPair, {static_cast<std::uint64_t>(first + i)});
    auto [x, y] = sample_pair(prior, mm, rng);
    s.xs.col(i) = x;
    s.ys.col(i) = y;
  }
  return s;
}

DatasetHandle generate_dataset(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm,
                               const SplitCounts& counts, std::uint64_t seed) {
  require(counts.train > 0 && counts.val > 0 && counts.test > 0, "split counts must be positive");
  prior.validate();
  mm.validate();
  require(prior.dim() == mm.dim(), "prior and measurement model dimensions differ");
  DatasetHandle h;
  h.prior = prior;
  h.mm = mm;
  h.seed = seed;
  h.counts = counts;
  h.train = generate_pairs(prior, mm, seed, 0, counts.train);
  h.val = generate_pairs(prior, mm, seed, counts.train, counts.val);
  h.test = generate_pairs(prior, mm, seed, counts.train + counts.val, counts.test);
  return h;
}

DatasetHandle generate_dataset(const TrainConfig& c) {
  return generate_dataset(prior_for(c), measurement_for(c), {c.n_train, c.n_val, c.n_test}, c.data_seed);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t prior_hash(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm) {
  std::uint64_t h = hash_doubles(prior.mean, 0xcbf29ce484222325ull);
  h = hash_doubles(prior.eigvals, h);
  h = hash_doubles(prior.eigvecs, h);
  for (Index i = 0; i < mm.dim(); ++i) {
    const unsigned char bit = mm.mask(i) ? 1 : 0;
    h = fnv1a(&bit, 1, h);
  }
  return hash_doubles(Mat<double>::Constant(1, 1, mm.noise_var), h);
}

void save_dataset(const DatasetHandle& h, const std::string& path) {
  std::string payload;
  payload.reserve(static_cast<std::size_t>(16 * h.dim() * h.counts.total()));
  for (const Split* s : {&h.train, &h.val, &h.test}) {
    put_doubles(payload, s->xs);
    put_doubles(payload, s->ys);
  }
  const json header = {
      {"format_version", kDatasetFormatVersion},
      {"rng", kRngAlgorithm},
      {"dim", h.dim()},
      {"counts", {{"train", h.counts.train}, {"val", h.counts.val}, {"test", h.counts.test}}},
      {"seed", h.seed},
      {"prior_hash", hex64(prior_hash(h.prior, h.mm))},
      {"payload_bytes", payload.size()},
      {"payload_checksum", hex64(fnv1a(payload.data(), payload.size()))},
      {"payload_layout", "train.x train.y val.x val.y test.x test.y; each dim x count, column-major, float64 LE"},
      {"prior", prior_to_json(h.prior)},
      {"measurement", measurement_to_json(h.mm)},
  };
  const std::string header_text = header.dump();

  std::string head(kMagic, sizeof kMagic);
  put_u32(head, kDatasetFormatVersion);
  put_u64(head, header_text.size());

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write dataset " + path);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("failed writing dataset " + path);
  }
  std::filesystem::rename(tmp, target);
}

DatasetHandle load_dataset(const std::string& path, std::optional<std::uint64_t> expected_prior_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());

  constexpr std::size_t kFixed = sizeof kMagic + 4 + 8;
  if (bytes.size() < kFixed) throw TruncatedFile(path + ": file shorter than its fixed header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw DataError(path + " is not a dataset container");
  const std::uint32_t version = get_u32(base + 8);
  if (version != kDatasetFormatVersion)
    throw VersionMismatch(path + ": format_version " + std::to_string(version) + ", expected " +
                          std::to_string(kDatasetFormatVersion));
  const std::uint64_t header_len = get_u64(base + 12);
  if (bytes.size() - kFixed < header_len) throw TruncatedFile(path + ": header cut short");
  const json header = json::parse(bytes.substr(kFixed, header_len), nullptr, false);
  if (header.is_discarded()) throw DataError(path + ": header is not valid JSON");

  DatasetHandle h;
  try {
    h.prior = prior_from_json(header.at("prior"));
    h.mm = measurement_from_json(header.at("measurement"));
    h.seed = header.at("seed").get<std::uint64_t>();
    const json& counts = header.at("counts");
    h.counts = {counts.at("train").get<Index>(), counts.at("val").get<Index>(), counts.at("test").get<Index>()};
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed header (" + e.what() + ")");
  }

  const std::uint64_t stored_hash = std::stoull(header.at("prior_hash").get<std::string>(), nullptr, 16);
  if (prior_hash(h.prior, h.mm) != stored_hash)
    throw HashMismatch(path + ": embedded prior does not match its recorded hash");
  if (expected_prior_hash && *expected_prior_hash != stored_hash)
    throw HashMismatch(path + ": prior hash " + hex64(stored_hash) + " differs from expected " +
                       hex64(*expected_prior_hash) + " (stale data?)");

  const Index d = h.prior.dim();
  const std::size_t payload_bytes = static_cast<std::size_t>(16 * d * h.counts.total());
  const std::size_t offset = kFixed + header_len;
  if (bytes.size() - offset < payload_bytes) throw TruncatedFile(path + ": payload cut short");
  if (bytes.size() - offset > payload_bytes) throw DataError(path + ": trailing bytes after payload");
  const std::uint64_t checksum = fnv1a(bytes.data() + offset, payload_bytes);
  if (hex64(checksum) != header.at("payload_checksum").get<std::string>())
    throw ChecksumMismatch(path + ": payload checksum mismatch");

  const unsigned char* p = base + offset;
  for (auto [split, n] : {std::pair{&h.train, h.counts.train}, {&h.val, h.counts.val}, {&h.test, h.counts.test}}) {
    split->xs = get_doubles(p, d, n);
    split->ys = get_doubles(p, d, n);
  }
  return h;
}

}  // namespace pcagan
