#include "disc/disnet/netspec.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "disc/errors.hpp"

namespace disc::net {
namespace {

std::size_t read_number(const std::string &tok, std::size_t &pos) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data() + pos, tok.data() + tok.size(), value);
  if (ec != std::errc())
    throw ConfigError("layer token '" + tok + "': expected a number at position " + std::to_string(pos));
  pos = static_cast<std::size_t>(ptr - tok.data());
  return value;
}

LayerSpec parse_token(const std::string &tok) {
  LayerSpec layer;
  if (tok == "LRN") {
    layer.kind = LayerKind::Lrn;
    return layer;
  }
  if (tok == "D") {
    layer.kind = LayerKind::Dropout;
    return layer;
  }
  if (tok.empty())
    throw ConfigError("empty layer token");
  std::size_t pos = 1;
  switch (tok[0]) {
  case 'C':
    layer.kind = LayerKind::Conv;
    layer.units = read_number(tok, pos);
    layer.kernel = 3;
    while (pos < tok.size()) {
      const char c = tok[pos++];
      const std::size_t v = read_number(tok, pos);
      if (c == 'k')
        layer.kernel = v;
      else if (c == 's')
        layer.stride = v;
      else if (c == 'p')
        layer.pad = v;
      else
        throw ConfigError("layer token '" + tok + "': unknown modifier '" + std::string(1, c) + "'");
    }
    break;
  case 'P':
    layer.kind = LayerKind::Pool;
    layer.kernel = pos < tok.size() && std::isdigit(static_cast<unsigned char>(tok[pos])) ? read_number(tok, pos) : 2;
    layer.stride = layer.kernel;
    if (pos < tok.size()) {
      if (tok[pos++] != 's')
        throw ConfigError("layer token '" + tok + "': expected 's<stride>'");
      layer.stride = read_number(tok, pos);
    }
    if (pos != tok.size())
      throw ConfigError("layer token '" + tok + "': trailing characters");
    break;
  case 'F':
    layer.kind = LayerKind::Fc;
    layer.units = read_number(tok, pos);
    if (pos != tok.size())
      throw ConfigError("layer token '" + tok + "': trailing characters");
    break;
  default:
    throw ConfigError("unknown layer token '" + tok + "'");
  }
  return layer;
}

std::string layer_label(std::size_t index, const LayerSpec &layer) {
  return "layer " + std::to_string(index + 1) + " (" + format_layers({layer}) + ")";
}

const char *kind_name(ModelKind k) { return k == ModelKind::Baseline ? "baseline" : "discnn"; }

} // namespace

std::vector<LayerSpec> parse_layers(const std::string &text) {
  std::vector<LayerSpec> layers;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '-'))
    layers.push_back(parse_token(tok));
  return layers;
}

std::string format_layers(const std::vector<LayerSpec> &layers) {
  std::string out;
  for (const auto &l : layers) {
    if (!out.empty())
      out += '-';
    switch (l.kind) {
    case LayerKind::Conv:
      out += "C" + std::to_string(l.units) + "k" + std::to_string(l.kernel);
      if (l.stride != 1)
        out += "s" + std::to_string(l.stride);
      if (l.pad != 0)
        out += "p" + std::to_string(l.pad);
      break;
    case LayerKind::Pool:
      out += "P" + std::to_string(l.kernel);
      if (l.stride != l.kernel)
        out += "s" + std::to_string(l.stride);
      break;
    case LayerKind::Lrn: out += "LRN"; break;
    case LayerKind::Fc: out += "F" + std::to_string(l.units); break;
    case LayerKind::Dropout: out += "D"; break;
    }
  }
  return out;
}

std::size_t NetSpec::embedding_size() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    if (it->kind == LayerKind::Fc)
      return it->units;
  return 0;
}

std::size_t NetSpec::category_inputs() const {
  return kind == ModelKind::Baseline ? embedding_size() : identity_units;
}

std::vector<std::array<std::size_t, 3>> trace_shapes(const NetSpec &spec) {
  std::vector<std::array<std::size_t, 3>> shapes;
  auto shape = spec.input_shape;
  if (shape[0] == 0 || shape[1] == 0 || shape[2] == 0)
    throw ConfigError("input shape must be positive");
  bool flat = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto &l = spec.layers[i];
    switch (l.kind) {
    case LayerKind::Conv:
      if (flat)
        throw ConfigError(layer_label(i, l) + ": convolution after a fully connected layer");
      if (l.units == 0 || l.kernel == 0 || l.stride == 0)
        throw ConfigError(layer_label(i, l) + ": filters, kernel and stride must be positive");
      if (shape[1] + 2 * l.pad < l.kernel || shape[2] + 2 * l.pad < l.kernel)
        throw ConfigError(layer_label(i, l) + ": kernel " + std::to_string(l.kernel) + " exceeds padded input " +
                          std::to_string(shape[1]) + "x" + std::to_string(shape[2]));
      shape = {l.units, (shape[1] + 2 * l.pad - l.kernel) / l.stride + 1,
               (shape[2] + 2 * l.pad - l.kernel) / l.stride + 1};
      break;
    case LayerKind::Pool:
      if (flat)
        throw ConfigError(layer_label(i, l) + ": pooling after a fully connected layer");
      if (l.kernel == 0 || l.stride == 0)
        throw ConfigError(layer_label(i, l) + ": window and stride must be positive");
      if (l.kernel > shape[1] || l.kernel > shape[2])
        throw ConfigError(layer_label(i, l) + ": window " + std::to_string(l.kernel) + " exceeds input " +
                          std::to_string(shape[1]) + "x" + std::to_string(shape[2]));
      shape = {shape[0], (shape[1] - l.kernel) / l.stride + 1, (shape[2] - l.kernel) / l.stride + 1};
      break;
    case LayerKind::Lrn:
      if (flat)
        throw ConfigError(layer_label(i, l) + ": LRN after a fully connected layer");
      break;
    case LayerKind::Fc:
      if (l.units == 0)
        throw ConfigError(layer_label(i, l) + ": unit count must be positive");
      shape = {l.units, 1, 1};
      flat = true;
      break;
    case LayerKind::Dropout: break;
    }
    shapes.push_back(shape);
  }
  return shapes;
}

void NetSpec::validate() const {
  if (layers.empty() || embedding_size() == 0)
    throw ConfigError("network needs at least one fully connected layer");
  trace_shapes(*this);
  if (num_categories == 0)
    throw ConfigError("num_categories must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout rate must lie in [0,1)");
  if (lrn.k <= 0 || lrn.depth == 0)
    throw ConfigError("LRN needs depth >= 1 and k > 0");
  if (init_std < 0)
    throw ConfigError("init_std must be non-negative");
  if (kind == ModelKind::Disentangled) {
    if (identity_units == 0 || pose_units == 0)
      throw ConfigError("identity_units and pose_units must both be positive");
    if (identity_units + pose_units != embedding_size())
      throw ConfigError("identity_units + pose_units = " + std::to_string(identity_units + pose_units) +
                        " but the final F layer has " + std::to_string(embedding_size()) + " units");
  }
}

NetSpec paper_preset(std::size_t num_categories, std::size_t num_pose_labels) {
  NetSpec spec;
  spec.layers = parse_layers("C96k11s4-P3s2-LRN-C256k5p2-P3s2-LRN-C384k3p1-C384k3p1-C256k3p1-P3s2-F1024-D-F1024-D");
  spec.input_shape = {3, 227, 227};
  spec.identity_units = 512;
  spec.pose_units = 512;
  spec.num_categories = num_categories;
  spec.num_pose_labels = num_pose_labels;
  return spec;
}

NetSpec desk_preset(std::size_t num_categories, std::size_t num_pose_labels) {
  NetSpec spec;
  spec.layers = parse_layers("C16k5p2-P2-LRN-C32k3p1-P2-C32k3p1-F128-D-F128-D");
  spec.input_shape = {3, 32, 32};
  spec.identity_units = 64;
  spec.pose_units = 64;
  spec.num_categories = num_categories;
  spec.num_pose_labels = num_pose_labels;
  // std 0.01 leaves the fc7 output around 1e-5 at this depth and width, too
  // small both to train on and to finite-difference at h = 1e-5.
  spec.init_std = 0.0;
  return spec;
}

NetSpec as_baseline(NetSpec spec) {
  spec.kind = ModelKind::Baseline;
  spec.identity_units = spec.embedding_size();
  spec.pose_units = 0;
  spec.num_pose_labels = 0;
  return spec;
}

NetSpec with_embedding_size(NetSpec spec, std::size_t units) {
  for (auto it = spec.layers.rbegin(); it != spec.layers.rend(); ++it)
    if (it->kind == LayerKind::Fc) {
      it->units = units;
      break;
    }
  if (spec.kind == ModelKind::Baseline) {
    spec.identity_units = units;
  } else {
    spec.identity_units = units / 2;
    spec.pose_units = units - units / 2;
  }
  return spec;
}

void write_netspec(const NetSpec &spec, IniDocument &doc, const std::string &section) {
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  doc.set(section, "kind", kind_name(spec.kind));
  doc.set(section, "layers", format_layers(spec.layers));
  doc.set(section, "input", std::to_string(spec.input_shape[0]) + "x" + std::to_string(spec.input_shape[1]) + "x" +
                                std::to_string(spec.input_shape[2]));
  doc.set(section, "identity_units", std::to_string(spec.identity_units));
  doc.set(section, "pose_units", std::to_string(spec.pose_units));
  doc.set(section, "num_categories", std::to_string(spec.num_categories));
  doc.set(section, "num_pose_labels", std::to_string(spec.num_pose_labels));
  doc.set(section, "lrn_depth", std::to_string(spec.lrn.depth));
  doc.set(section, "lrn_k", fmt(spec.lrn.k));
  doc.set(section, "lrn_alpha", fmt(spec.lrn.alpha));
  doc.set(section, "lrn_beta", fmt(spec.lrn.beta));
  doc.set(section, "dropout", fmt(spec.dropout_rate));
  doc.set(section, "init_std", fmt(spec.init_std));
  doc.set(section, "tie_loss", spec.tie_form == TieLossForm::Norm ? "norm" : "squared");
  doc.set(section, "category_stream", spec.category_stream == CategoryStream::Left ? "left" : "right");
}

NetSpec read_netspec(const IniDocument &doc, const std::string &section) {
  NetSpec spec;
  const std::string kind = doc.get_string(section, "kind", "discnn");
  if (kind == "baseline")
    spec.kind = ModelKind::Baseline;
  else if (kind != "discnn")
    throw ConfigError("[" + section + "] kind must be discnn or baseline, got '" + kind + "'");
  spec.layers = parse_layers(doc.get_string(section, "layers", ""));
  const std::string input = doc.get_string(section, "input", "3x32x32");
  {
    std::stringstream ss(input);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, 'x')) {
      if (i >= 3)
        throw ConfigError("[" + section + "] input must be CxHxW, got '" + input + "'");
      spec.input_shape[i++] = static_cast<std::size_t>(std::stoul(part));
    }
    if (i != 3)
      throw ConfigError("[" + section + "] input must be CxHxW, got '" + input + "'");
  }
  auto count = [&](const char *key) {
    const auto v = doc.get_int(section, key, 0);
    if (v < 0)
      throw ConfigError("[" + section + "] " + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  spec.identity_units = count("identity_units");
  spec.pose_units = count("pose_units");
  spec.num_categories = count("num_categories");
  spec.num_pose_labels = count("num_pose_labels");
  spec.lrn.depth = static_cast<std::size_t>(doc.get_int(section, "lrn_depth", 5));
  spec.lrn.k = doc.get_double(section, "lrn_k", 2.0);
  spec.lrn.alpha = doc.get_double(section, "lrn_alpha", 1e-4);
  spec.lrn.beta = doc.get_double(section, "lrn_beta", 0.75);
  spec.dropout_rate = doc.get_double(section, "dropout", 0.5);
  spec.init_std = doc.get_double(section, "init_std", 0.01);
  const std::string tie = doc.get_string(section, "tie_loss", "norm");
  if (tie != "norm" && tie != "squared")
    throw ConfigError("[" + section + "] tie_loss must be norm or squared");
  spec.tie_form = tie == "norm" ? TieLossForm::Norm : TieLossForm::SquaredNorm;
  const std::string stream = doc.get_string(section, "category_stream", "left");
  if (stream != "left" && stream != "right")
    throw ConfigError("[" + section + "] category_stream must be left or right");
  spec.category_stream = stream == "left" ? CategoryStream::Left : CategoryStream::Right;
  return spec;
}

std::string netspec_to_text(const NetSpec &spec) {
  IniDocument doc;
  write_netspec(spec, doc);
  return doc.to_string();
}

NetSpec netspec_from_text(const std::string &text) {
  const auto doc = IniDocument::parse(text, "<netspec>");
  return read_netspec(doc);
}

} // namespace disc::net
