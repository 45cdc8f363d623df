#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "driftguard/datasets.hpp"
#include "driftguard/error.hpp"

// Cache layout (text, whitespace separated, one record per line):
//
//   driftguard-dataset 1 <name> <sha256>
//   target <name-with-underscores> <standardized 0|1> <mean> <std>
//   feature <j> <name-with-underscores> <mean> <std> <n values...>
//   targets <n values...>
//   blocks <n ids...>
//   block <b> <role> <start> <end>
//
// Numbers are C99 hex floats so that the cache reproduces the series exactly.

namespace driftguard {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

std::string encode_name(std::string s) {
  for (auto& c : s)
    if (c == ' ') c = '_';
  return s.empty() ? "_" : s;
}

std::string decode_name(std::string s) {
  for (auto& c : s)
    if (c == '_') c = ' ';
  return s;
}

double next_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw DataError("dataset cache: truncated record");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (*end != '\0') throw DataError("dataset cache: bad number " + tok);
  return v;
}

BlockRole role_from_string(const std::string& s) {
  if (s == "train") return BlockRole::train;
  if (s == "val") return BlockRole::val;
  if (s == "deploy") return BlockRole::deploy;
  throw DataError("dataset cache: bad role " + s);
}

}  // namespace

void write_dataset_cache(const BlockedSeries& s, const std::string& path) {
  s.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset cache " + path);
  out << fmt::format("driftguard-dataset 1 {} {}\n", encode_name(s.name), s.source_sha256.empty() ? "-" : s.source_sha256);
  out << fmt::format("rows {} dim {} blocks {}\n", s.features.rows(), s.dim(), s.num_blocks());
  out << fmt::format("target {} {} {:a} {:a}\n", encode_name(s.target_name), s.target_standardized ? 1 : 0,
                     s.target_scaling.mean, s.target_scaling.std);
  for (std::size_t j = 0; j < s.dim(); ++j) {
    out << fmt::format("feature {} {} {:a} {:a}", j, encode_name(s.feature_names[j]), s.standardization[j].mean,
                       s.standardization[j].std);
    for (std::size_t i = 0; i < s.features.rows(); ++i) out << fmt::format(" {:a}", s.features(i, j));
    out << '\n';
  }
  out << "targets";
  for (double y : s.targets) out << fmt::format(" {:a}", y);
  out << "\nblock_ids";
  for (int b : s.block_ids) out << ' ' << b;
  out << '\n';
  for (std::size_t b = 0; b < s.num_blocks(); ++b)
    out << fmt::format("block {} {} {:a} {:a}\n", b, to_string(s.roles[b]), s.block_time_spans[b].first,
                       s.block_time_spans[b].second);
}

BlockedSeries read_dataset_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset cache " + path);
  std::string tok, name, sha;
  int version = 0;
  if (!(in >> tok >> version >> name >> sha) || tok != "driftguard-dataset" || version != 1)
    throw DataError("dataset cache: bad header");
  BlockedSeries s;
  s.name = decode_name(name);
  s.source_sha256 = sha == "-" ? "" : sha;
  std::size_t rows = 0, dim = 0, blocks = 0;
  std::string k1, k2, k3;
  if (!(in >> k1 >> rows >> k2 >> dim >> k3 >> blocks) || k1 != "rows" || k2 != "dim" || k3 != "blocks")
    throw DataError("dataset cache: bad shape record");
  int standardized = 0;
  if (!(in >> tok >> name >> standardized) || tok != "target") throw DataError("dataset cache: bad target record");
  s.target_name = decode_name(name);
  s.target_standardized = standardized != 0;
  s.target_scaling.mean = next_double(in);
  s.target_scaling.std = next_double(in);
  s.features = Matrix(rows, dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::size_t idx = 0;
    if (!(in >> tok >> idx >> name) || tok != "feature" || idx != j) throw DataError("dataset cache: bad feature record");
    s.feature_names.push_back(decode_name(name));
    FeatureScaling fs;
    fs.mean = next_double(in);
    fs.std = next_double(in);
    s.standardization.push_back(fs);
    for (std::size_t i = 0; i < rows; ++i) s.features(i, j) = next_double(in);
  }
  if (!(in >> tok) || tok != "targets") throw DataError("dataset cache: missing targets");
  s.targets.resize(rows);
  for (auto& y : s.targets) y = next_double(in);
  if (!(in >> tok) || tok != "block_ids") throw DataError("dataset cache: missing block ids");
  s.block_ids.resize(rows);
  for (auto& b : s.block_ids)
    if (!(in >> b)) throw DataError("dataset cache: truncated block ids");
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t idx = 0;
    std::string role;
    if (!(in >> tok >> idx >> role) || tok != "block" || idx != b) throw DataError("dataset cache: bad block record");
    s.roles.push_back(role_from_string(role));
    const double lo = next_double(in);
    const double hi = next_double(in);
    s.block_time_spans.emplace_back(lo, hi);
  }
  s.validate();
  return s;
}

}  // namespace driftguard
