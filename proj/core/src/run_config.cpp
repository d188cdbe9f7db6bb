#include "v2tex/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ValidationError("config: '" + std::string(key) + "' expects an integer, got '" +
                          std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    return csv::parse_double(value, key);
  } catch (const FormatError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError("config: '" + std::string(key) + "' expects true/false, got '" +
                        std::string(value) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  auto int_field = [](auto member) -> Setter {
    return [member](RunConfig& c, std::string_view k, std::string_view v) {
      member(c) = parse_integer<int>(k, v);
    };
  };
  auto real_field = [](auto member) -> Setter {
    return [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_real(k, v); };
  };
  auto bool_field = [](auto member) -> Setter {
    return [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); };
  };
  static const std::map<std::string, Setter, std::less<>> table{
      {"scales", int_field([](RunConfig& c) -> int& { return c.v1.num_scales; })},
      {"orientations", int_field([](RunConfig& c) -> int& { return c.v1.num_orientations; })},
      {"grid_factor", int_field([](RunConfig& c) -> int& { return c.v1.common_grid_factor; })},
      {"d", int_field([](RunConfig& c) -> int& { return c.model.d; })},
      {"kernel", int_field([](RunConfig& c) -> int& { return c.model.kernel; })},
      {"pool_window", int_field([](RunConfig& c) -> int& { return c.model.pool_window; })},
      {"learning_rate", real_field([](RunConfig& c) -> double& { return c.train.learning_rate; })},
      {"batch_size", int_field([](RunConfig& c) -> int& { return c.train.batch_size; })},
      {"epochs", int_field([](RunConfig& c) -> int& { return c.train.epochs; })},
      {"lambda", real_field([](RunConfig& c) -> double& { return c.train.lambda; })},
      {"epsilon", real_field([](RunConfig& c) -> double& { return c.train.epsilon; })},
      {"checkpoint_every", int_field([](RunConfig& c) -> int& { return c.train.checkpoint_every; })},
      {"augment_rotations", bool_field([](RunConfig& c) -> bool& { return c.train.augment_rotations; })},
      {"gamma", real_field([](RunConfig& c) -> double& { return c.qda.shrinkage; })},
      {"uniform_prior", bool_field([](RunConfig& c) -> bool& { return c.qda.uniform_prior; })},
      {"seed",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.seed = parse_integer<std::uint64_t>(k, v);
       }},
      {"families", int_field([](RunConfig& c) -> int& { return c.synth.families; })},
      {"samples_per_family", int_field([](RunConfig& c) -> int& { return c.synth.samples_per_family; })},
      {"image_size", int_field([](RunConfig& c) -> int& { return c.synth.size; })},
      {"train_fraction", real_field([](RunConfig& c) -> double& { return c.synth.train_fraction; })},
      {"val_fraction", real_field([](RunConfig& c) -> double& { return c.synth.val_fraction; })},
  };
  return table;
}

}  // namespace

void ModelShape::validate() const {
  if (d < 1) throw ValidationError("d must be >= 1");
  if (kernel < 1) throw ValidationError("kernel must be >= 1");
  if (pool_window < 1) throw ValidationError("pool_window must be >= 1");
}

void RunConfig::finalize() {
  train.seed = seed;
  synth.seed = seed;
  validate();
}

void RunConfig::validate() const {
  v1.validate();
  model.validate();
  train.validate();
  qda.validate();
  synth.validate();
  if (synth.size % v1.common_grid_factor != 0) {
    throw ValidationError("image_size must be divisible by grid_factor");
  }
  if (synth.size < (1 << v1.num_scales)) throw ValidationError("image_size too small for the scale count");
  if (synth.size / v1.common_grid_factor < model.kernel + model.pool_window - 1) {
    throw ValidationError("image_size too small for kernel and pool_window");
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "scales = " << v1.num_scales << "\n"
      << "orientations = " << v1.num_orientations << "\n"
      << "grid_factor = " << v1.common_grid_factor << "\n"
      << "d = " << model.d << "\n"
      << "kernel = " << model.kernel << "\n"
      << "pool_window = " << model.pool_window << "\n"
      << "learning_rate = " << csv::format_double(train.learning_rate) << "\n"
      << "batch_size = " << train.batch_size << "\n"
      << "epochs = " << train.epochs << "\n"
      << "lambda = " << csv::format_double(train.lambda) << "\n"
      << "epsilon = " << csv::format_double(train.epsilon) << "\n"
      << "checkpoint_every = " << train.checkpoint_every << "\n"
      << "augment_rotations = " << (train.augment_rotations ? "true" : "false") << "\n"
      << "gamma = " << csv::format_double(qda.shrinkage) << "\n"
      << "uniform_prior = " << (qda.uniform_prior ? "true" : "false") << "\n"
      << "seed = " << seed << "\n"
      << "families = " << synth.families << "\n"
      << "samples_per_family = " << synth.samples_per_family << "\n"
      << "image_size = " << synth.size << "\n"
      << "train_fraction = " << csv::format_double(synth.train_fraction) << "\n"
      << "val_fraction = " << csv::format_double(synth.val_fraction) << "\n";
  return out.str();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError("config: unknown key '" + std::string(key) + "'");
    if (!seen.emplace(key).second) throw ValidationError("config: repeated key '" + std::string(key) + "'");
    if (value.empty()) throw ValidationError("config: empty value for '" + std::string(key) + "'");
    it->second(config, key, value);
  }
  config.finalize();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace v2tex
