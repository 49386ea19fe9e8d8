#include "segctc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace segctc {
namespace {

namespace pt = boost::property_tree;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "data.train_features", "data.train_labels", "data.valid_features", "data.valid_labels",
      "data.vocab",          "data.mapping",      "encoder.hidden_dim",  "encoder.layers",
      "encoder.subsample",   "scrf.max_seg_len",  "scrf.label_dim",      "scrf.feature_dim",
      "scrf.extra_layers",   "scrf.activation",   "ctc.blank",           "train.lambda",
      "train.lr_init",       "train.lr_decay",    "train.dropout",       "train.epochs",
      "train.pretrain_epochs", "train.seed",      "train.batch_size",    "train.clip_norm",
      "train.valid_mode",    "train.out_dir",     "model.input_dim",     "model.vocab_size",
      "model.hidden_dim",    "model.layers",      "model.subsample",     "model.max_seg_len",
      "model.label_dim",     "model.feature_dim", "model.extra_layers",  "model.activation",
  };
  return keys;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error("config key '" + key + "': cannot parse '" + value + "'");
  }
  return v;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        throw Error("config key '" + section + "' is outside any section");
      }
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!known_keys().count(full)) throw Error("unknown config key '" + full + "'");
      }
    }
  }

  std::optional<std::string> find(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return *v;
  }

  std::string required(const std::string& key) const {
    auto v = find(key);
    if (!v) throw Error("missing config key '" + key + "'");
    return *v;
  }

  template <class T>
  T number(const std::string& key, T fallback) const {
    auto v = find(key);
    return v ? parse_number<T>(key, *v) : fallback;
  }

  template <class T>
  T required_number(const std::string& key) const {
    return parse_number<T>(key, required(key));
  }

 private:
  const pt::ptree& tree_;
};

std::vector<std::size_t> parse_factors(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_number<std::size_t>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::string join_factors(const std::vector<std::size_t>& f) {
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + std::to_string(f[i]);
  return out;
}

std::string real_str(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

pt::ptree read_tree(const std::string& text, const std::vector<ConfigOverride>& overrides) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  for (const auto& [key, value] : overrides) {
    if (key.find('.') == std::string::npos) throw Error("override '" + key + "' needs a section");
    tree.put(pt::ptree::path_type(key, '.'), value);
  }
  return tree;
}

void read_train(const Reader& r, TrainConfig& t, bool require_run_keys) {
  t.lambda = r.number("train.lambda", t.lambda);
  t.lr_init = r.number("train.lr_init", t.lr_init);
  t.lr_decay = r.number("train.lr_decay", t.lr_decay);
  t.dropout = r.number("train.dropout", t.dropout);
  t.epochs = require_run_keys ? r.required_number<int>("train.epochs") : r.number("train.epochs", t.epochs);
  t.pretrain_epochs = r.number("train.pretrain_epochs", t.pretrain_epochs);
  t.seed = require_run_keys ? r.required_number<std::uint64_t>("train.seed")
                            : r.number("train.seed", t.seed);
  t.batch_size = r.number("train.batch_size", t.batch_size);
  t.clip_norm = r.number("train.clip_norm", t.clip_norm);
  const std::string mode = r.find("train.valid_mode").value_or("auto");
  if (mode == "auto") {
    t.valid_mode.reset();
  } else {
    t.valid_mode = parse_decode_mode(mode);
  }
  t.validate();
}

}  // namespace

ConfigOverride parse_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override '" + spec + "' is not section.key=value");
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  return {trim(spec.substr(0, eq)), trim(spec.substr(eq + 1))};
}

RunConfig parse_run_config(const std::string& text, const std::vector<ConfigOverride>& overrides,
                           const std::filesystem::path& base_dir) {
  const pt::ptree tree = read_tree(text, overrides);
  const Reader r(tree);
  RunConfig c;
  auto path = [&](const std::string& key) {
    std::filesystem::path p = r.required(key);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  c.data.train_features = path("data.train_features");
  c.data.train_labels = path("data.train_labels");
  c.data.valid_features = path("data.valid_features");
  c.data.valid_labels = path("data.valid_labels");
  c.data.vocab = path("data.vocab");
  if (r.find("data.mapping")) c.data.mapping = path("data.mapping");

  ModelConfig& m = c.model;
  m.hidden_dim = r.number("encoder.hidden_dim", m.hidden_dim);
  m.layers = r.number("encoder.layers", m.layers);
  if (auto s = r.find("encoder.subsample")) {
    m.subsample = parse_factors("encoder.subsample", *s);
  } else if (m.layers != 3) {
    m.subsample.assign(m.layers > 0 ? m.layers - 1 : 0, 1);
  }
  if (m.layers == 0) throw Error("config key 'encoder.layers' must be >= 1");
  if (m.subsample.size() != m.layers - 1) {
    throw Error("config key 'encoder.subsample' must list layers-1 = " + std::to_string(m.layers - 1) +
                " factors");
  }
  m.max_seg_len = r.number("scrf.max_seg_len", m.max_seg_len);
  if (m.max_seg_len == 0) throw Error("config key 'scrf.max_seg_len' must be >= 1");
  m.label_dim = r.number("scrf.label_dim", m.label_dim);
  m.feature_dim = r.number("scrf.feature_dim", m.feature_dim);
  m.extra_feature_layers = r.number("scrf.extra_layers", m.extra_feature_layers);
  if (auto a = r.find("scrf.activation")) m.activation = parse_activation(*a);
  if (auto b = r.find("ctc.blank"); b && *b != "0") {
    throw Error("config key 'ctc.blank': the blank id is fixed at 0");
  }

  read_train(r, c.train, true);
  std::filesystem::path out = r.required("train.out_dir");
  c.out_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<ConfigOverride>& overrides) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), overrides, path.parent_path());
}

std::string format_model_snapshot(const ModelConfig& m, const TrainConfig& t) {
  std::string s = "[model]\n";
  s += "input_dim = " + std::to_string(m.input_dim) + "\n";
  s += "vocab_size = " + std::to_string(m.vocab_size) + "\n";
  s += "hidden_dim = " + std::to_string(m.hidden_dim) + "\n";
  s += "layers = " + std::to_string(m.layers) + "\n";
  s += "subsample = " + join_factors(m.subsample) + "\n";
  s += "max_seg_len = " + std::to_string(m.max_seg_len) + "\n";
  s += "label_dim = " + std::to_string(m.label_dim) + "\n";
  s += "feature_dim = " + std::to_string(m.feature_dim) + "\n";
  s += "extra_layers = " + std::to_string(m.extra_feature_layers) + "\n";
  s += "activation = " + std::string(activation_name(m.activation)) + "\n";
  s += "[train]\n";
  s += "lambda = " + real_str(t.lambda) + "\n";
  s += "lr_init = " + real_str(t.lr_init) + "\n";
  s += "lr_decay = " + real_str(t.lr_decay) + "\n";
  s += "dropout = " + real_str(t.dropout) + "\n";
  s += "epochs = " + std::to_string(t.epochs) + "\n";
  s += "pretrain_epochs = " + std::to_string(t.pretrain_epochs) + "\n";
  s += "seed = " + std::to_string(t.seed) + "\n";
  s += "batch_size = " + std::to_string(t.batch_size) + "\n";
  s += "clip_norm = " + real_str(t.clip_norm) + "\n";
  s += "valid_mode = " +
       (t.valid_mode ? std::string(decode_mode_name(*t.valid_mode)) : std::string("auto")) + "\n";
  return s;
}

std::pair<ModelConfig, TrainConfig> parse_model_snapshot(const std::string& text) {
  const pt::ptree tree = read_tree(text, {});
  const Reader r(tree);
  ModelConfig m;
  m.input_dim = r.required_number<std::size_t>("model.input_dim");
  m.vocab_size = r.required_number<std::size_t>("model.vocab_size");
  m.hidden_dim = r.required_number<std::size_t>("model.hidden_dim");
  m.layers = r.required_number<std::size_t>("model.layers");
  m.subsample = parse_factors("model.subsample", r.find("model.subsample").value_or(""));
  m.max_seg_len = r.required_number<std::size_t>("model.max_seg_len");
  m.label_dim = r.required_number<std::size_t>("model.label_dim");
  m.feature_dim = r.required_number<std::size_t>("model.feature_dim");
  m.extra_feature_layers = r.required_number<std::size_t>("model.extra_layers");
  m.activation = parse_activation(r.required("model.activation"));
  TrainConfig t;
  read_train(r, t, true);
  return {m, t};
}

}  // namespace segctc
