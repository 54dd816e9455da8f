#include "dyged/checkpoint.hpp"

#include <sstream>

#include "dyged/error.hpp"
#include "dyged/text.hpp"

namespace dyged::checkpoint {

std::string serialize(const ModelParams& params) {
  const auto& c = params.config;
  std::ostringstream os;
  os << "dyged-checkpoint " << kVersion << '\n';
  os << "variant " << to_string(c.variant) << '\n';
  os << "d_in " << c.d_in << '\n';
  os << "hidden " << c.hidden << '\n';
  os << "embed " << c.embed << '\n';
  os << "k " << c.k << '\n';
  os << "mlp_layers " << c.mlp_layers << '\n';
  os << "dropout " << text::format_real(c.dropout) << '\n';
  for_each_param(c.variant, params.tree, [&](const std::string& name, const Matrix& m) {
    os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? "\t" : "") << text::format_real(m(i, j));
      os << '\n';
    }
  });
  os << "end\n";
  return os.str();
}

namespace {

class LineReader {
 public:
  LineReader(std::string_view content, std::string source)
      : lines_(text::split(content, '\n')), source_(std::move(source)) {}

  std::string where() const { return source_ + ":" + std::to_string(pos_); }

  std::string_view next() {
    if (pos_ >= lines_.size()) fail(ErrorKind::parse, source_ + ": unexpected end of checkpoint");
    auto line = lines_[pos_++];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  }

  std::string_view expect_field(std::string_view key) {
    auto line = next();
    auto parts = text::split_ws(line);
    if (parts.size() != 2 || parts[0] != key) {
      fail(ErrorKind::parse, where() + ": expected '" + std::string(key) + " <value>'");
    }
    return parts[1];
  }

  std::size_t expect_count(std::string_view key) {
    const auto v = text::parse_int(expect_field(key), where());
    if (v < 0) fail(ErrorKind::parse, where() + ": negative " + std::string(key));
    return static_cast<std::size_t>(v);
  }

 private:
  std::vector<std::string_view> lines_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

ModelParams deserialize(std::string_view content, const std::string& source) {
  LineReader in(content, source);
  {
    auto header = text::split_ws(in.next());
    if (header.size() != 2 || header[0] != "dyged-checkpoint") {
      fail(ErrorKind::parse, in.where() + ": not a dyged checkpoint");
    }
    if (text::parse_int(header[1], in.where()) != kVersion) {
      fail(ErrorKind::parse, in.where() + ": unsupported checkpoint version " + std::string(header[1]));
    }
  }
  ModelConfig c;
  try {
    c.variant = parse_variant(in.expect_field("variant"));
  } catch (const Error& e) {
    fail(ErrorKind::parse, in.where() + ": " + e.what());
  }
  c.d_in = in.expect_count("d_in");
  c.hidden = in.expect_count("hidden");
  c.embed = in.expect_count("embed");
  c.k = in.expect_count("k");
  c.mlp_layers = in.expect_count("mlp_layers");
  c.dropout = text::parse_real(in.expect_field("dropout"), in.where());

  ModelParams p;
  p.config = c;
  p.tree.mlp.weights.resize(c.mlp_layers);
  p.tree.mlp.biases.resize(c.mlp_layers);
  const auto shapes = param_shapes(c);
  std::size_t idx = 0;
  for_each_param(c.variant, p.tree, [&](const std::string& name, Matrix& m) {
    const auto& [want_name, want_shape] = shapes[idx++];
    auto head = text::split_ws(in.next());
    if (head.size() != 4 || head[0] != "tensor" || head[1] != name) {
      fail(ErrorKind::parse, in.where() + ": expected tensor '" + name + "'");
    }
    const auto rows = static_cast<std::size_t>(text::parse_int(head[2], in.where()));
    const auto cols = static_cast<std::size_t>(text::parse_int(head[3], in.where()));
    if (rows != want_shape.first || cols != want_shape.second) {
      fail(ErrorKind::parse, in.where() + ": tensor '" + name + "' is " + shape_str(rows, cols) +
                                 ", config implies " + shape_str(want_shape.first, want_shape.second));
    }
    m = Matrix(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      auto vals = text::split(in.next(), '\t');
      if (vals.size() != cols) fail(ErrorKind::parse, in.where() + ": expected " + std::to_string(cols) + " values");
      for (std::size_t j = 0; j < cols; ++j) m(i, j) = text::parse_real(vals[j], in.where());
    }
  });
  if (text::trim(in.next()) != "end") fail(ErrorKind::parse, in.where() + ": expected 'end'");
  return p;
}

void save(const ModelParams& params, const std::filesystem::path& path) {
  text::write_file(path, serialize(params));
}

ModelParams load(const std::filesystem::path& path) {
  return deserialize(text::read_file(path), path.string());
}

}  // namespace dyged::checkpoint
