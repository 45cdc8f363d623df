#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "driftguard/error.hpp"
#include "driftguard/mlp.hpp"

// Format (one token per whitespace-separated field):
//
//   driftguard-mlp 1
//   dims <n> <d0> <d1> ... <d_{n-1}>
//   W <l> <rows> <cols> <rows*cols hex floats, row-major>
//   b <l> <len> <len hex floats>
//   ... repeated for every layer ...
//   end

namespace driftguard {

namespace {

constexpr const char* kMagic = "driftguard-mlp";
constexpr int kVersion = 1;

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) throw DataError(fmt::format("checkpoint: expected '{}', found '{}'", want, got));
}

double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw DataError("checkpoint: truncated parameter list");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw DataError("checkpoint: bad number '" + tok + "'");
  return v;
}

std::size_t read_size(std::istream& in) {
  long long v = -1;
  if (!(in >> v) || v < 0) throw DataError("checkpoint: bad size field");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string serialize_model(const MlpModel& model) {
  model.validate();
  std::string out = fmt::format("{} {}\ndims {}", kMagic, kVersion, model.layer_dims.size());
  for (auto d : model.layer_dims) out += fmt::format(" {}", d);
  out += '\n';
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.weights[l];
    out += fmt::format("W {} {} {}", l, w.rows(), w.cols());
    for (double x : w.data()) out += fmt::format(" {:a}", x);
    out += fmt::format("\nb {} {}", l, model.biases[l].size());
    for (double x : model.biases[l]) out += fmt::format(" {:a}", x);
    out += '\n';
  }
  out += "end\n";
  return out;
}

MlpModel deserialize_model(const std::string& text) {
  std::istringstream in(text);
  expect_token(in, kMagic);
  int version = 0;
  if (!(in >> version) || version != kVersion) throw DataError("checkpoint: unsupported version");
  expect_token(in, "dims");
  const std::size_t n = read_size(in);
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) d = read_size(in);
  MlpModel m = MlpModel::zeros(dims);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    expect_token(in, "W");
    if (read_size(in) != l) throw DataError("checkpoint: layer index out of order");
    const std::size_t rows = read_size(in), cols = read_size(in);
    if (rows != m.weights[l].rows() || cols != m.weights[l].cols()) throw DataError("checkpoint: weight shape mismatch");
    for (auto& x : m.weights[l].data()) x = read_double(in);
    expect_token(in, "b");
    if (read_size(in) != l) throw DataError("checkpoint: layer index out of order");
    if (read_size(in) != m.biases[l].size()) throw DataError("checkpoint: bias length mismatch");
    for (auto& x : m.biases[l]) x = read_double(in);
  }
  expect_token(in, "end");
  m.validate();
  return m;
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out << serialize_model(model);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace driftguard
