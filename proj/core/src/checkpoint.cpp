#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include "milcheck/errors.hpp"
#include "milcheck/refmodels.hpp"

namespace milcheck {

namespace {

constexpr std::string_view kMagic = "milcheck-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) {
    throw ParseError(std::string("checkpoint: expected ") + what);
  }
  return v;
}

void expect_word(std::istream& in, std::string_view word) {
  const auto got = read_value<std::string>(in, "keyword");
  if (got != word) {
    throw ParseError("checkpoint: expected '" + std::string(word) + "', got '" + got + "'");
  }
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("checkpoint: bad number '" + token + "'");
  }
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params) {
  const Architecture arch = params.architecture();
  const auto& layout = arch.layout();
  if (params.values.size() != layout.total_size()) {
    throw ArgumentError("save_checkpoint: parameter count does not match layout");
  }
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << to_string(params.kind) << '\n';
  out << "shape " << params.shape.input_dim << ' ' << params.shape.hidden << ' '
      << params.shape.attention << ' ' << nn::to_string(params.shape.activation) << '\n';
  out << "tensors " << layout.tensors().size() << '\n';
  for (const auto& t : layout.tensors()) {
    out << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(params.values[t.offset + j]);
    }
    out << '\n';
  }
}

ModelParams load_checkpoint(std::istream& in) {
  expect_word(in, kMagic);
  const int version = read_value<int>(in, "version");
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  expect_word(in, "kind");
  ModelParams p;
  try {
    p.kind = parse_model_kind(read_value<std::string>(in, "model kind"));
  } catch (const UsageError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  expect_word(in, "shape");
  p.shape.input_dim = read_value<Eigen::Index>(in, "input_dim");
  p.shape.hidden = read_value<Eigen::Index>(in, "hidden");
  p.shape.attention = read_value<Eigen::Index>(in, "attention");
  try {
    p.shape.activation = nn::parse_activation(read_value<std::string>(in, "activation"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  const Architecture arch(p.kind, p.shape);
  const auto& layout = arch.layout();

  expect_word(in, "tensors");
  const auto count = read_value<std::size_t>(in, "tensor count");
  if (count != layout.tensors().size()) {
    throw ParseError("checkpoint: tensor count does not match model kind");
  }
  p.values.resize(layout.total_size());
  for (const auto& t : layout.tensors()) {
    const auto name = read_value<std::string>(in, "tensor name");
    const auto rows = read_value<Eigen::Index>(in, "rows");
    const auto cols = read_value<Eigen::Index>(in, "cols");
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw ParseError("checkpoint: tensor '" + name + "' does not match expected '" + t.name +
                       "' " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      p.values[t.offset + j] = parse_double(read_value<std::string>(in, "tensor value"));
    }
  }
  return p;
}

}  // namespace milcheck
