#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "c2f/datagen.hpp"
#include "c2f/errors.hpp"
#include "c2f/trainer.hpp"

namespace c2f::train {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidSpecError("bad number '" + s + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw InvalidSpecError("non-finite number '" + s + "'");
  }
  return value;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"base_lr", [](TrainConfig& c, const std::string& v) { c.base_lr = parse_number<double>(v); }},
      {"lr_decay_factor",
       [](TrainConfig& c, const std::string& v) { c.lr_decay_factor = parse_number<double>(v); }},
      {"decay_epoch",
       [](TrainConfig& c, const std::string& v) { c.decay_epoch = parse_number<std::size_t>(v); }},
      {"epochs", [](TrainConfig& c, const std::string& v) { c.epochs = parse_number<std::size_t>(v); }},
      {"batch_size",
       [](TrainConfig& c, const std::string& v) { c.batch_size = parse_number<std::size_t>(v); }},
      {"input_size",
       [](TrainConfig& c, const std::string& v) { c.input_size = parse_number<std::size_t>(v); }},
      {"scales",
       [](TrainConfig& c, const std::string& v) {
         const auto parts = split_list(v);
         if (parts.size() != 3) throw InvalidSpecError("scales needs exactly 3 values");
         for (std::size_t i = 0; i < 3; ++i) c.scales[i] = parse_number<double>(parts[i]);
       }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"beta1", [](TrainConfig& c, const std::string& v) { c.beta1 = parse_number<double>(v); }},
      {"beta2", [](TrainConfig& c, const std::string& v) { c.beta2 = parse_number<double>(v); }},
      {"eps", [](TrainConfig& c, const std::string& v) { c.eps = parse_number<double>(v); }},
      {"clip_norm", [](TrainConfig& c, const std::string& v) { c.clip_norm = parse_number<double>(v); }},
      {"max_steps",
       [](TrainConfig& c, const std::string& v) { c.max_steps = parse_number<std::size_t>(v); }},
      {"keep_checkpoints",
       [](TrainConfig& c, const std::string& v) { c.keep_checkpoints = parse_number<std::size_t>(v); }},
      {"checkpoint_dir", [](TrainConfig& c, const std::string& v) { c.checkpoint_dir = v; }},
      {"widths",
       [](TrainConfig& c, const std::string& v) {
         const auto parts = split_list(v);
         if (parts.size() != 5) throw InvalidSpecError("widths needs exactly 5 values");
         for (std::size_t i = 0; i < 5; ++i) c.net.widths[i] = parse_number<std::size_t>(parts[i]);
       }},
      {"unified_width",
       [](TrainConfig& c, const std::string& v) { c.net.unified = parse_number<std::size_t>(v); }},
      {"refine_width",
       [](TrainConfig& c, const std::string& v) { c.net.refine_width = parse_number<std::size_t>(v); }},
      {"head_width",
       [](TrainConfig& c, const std::string& v) { c.net.head_width = parse_number<std::size_t>(v); }},
      {"reduction",
       [](TrainConfig& c, const std::string& v) { c.net.reduction = parse_number<std::size_t>(v); }},
      {"init_seed",
       [](TrainConfig& c, const std::string& v) { c.net.seed = parse_number<std::uint64_t>(v); }},
  };
  return table;
}

}  // namespace

TrainConfig TrainConfig::full_scale() {
  TrainConfig cfg;
  cfg.input_size = 352;
  cfg.batch_size = 30;
  cfg.epochs = 100;
  return cfg;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(number) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidSpecError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw InvalidSpecError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw InvalidSpecError(where + "repeated key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const InvalidSpecError& e) {
      throw InvalidSpecError(where + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const InvalidSpecError& e) {
    throw InvalidSpecError(path.string() + ": " + e.what());
  }
}

std::string TrainConfig::to_text() const {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("base_lr", fmt(base_lr));
  line("lr_decay_factor", fmt(lr_decay_factor));
  line("decay_epoch", std::to_string(decay_epoch));
  line("epochs", std::to_string(epochs));
  line("batch_size", std::to_string(batch_size));
  line("input_size", std::to_string(input_size));
  line("scales", fmt(scales[0]) + ", " + fmt(scales[1]) + ", " + fmt(scales[2]));
  line("seed", std::to_string(seed));
  line("beta1", fmt(beta1));
  line("beta2", fmt(beta2));
  line("eps", fmt(eps));
  line("clip_norm", fmt(clip_norm));
  line("max_steps", std::to_string(max_steps));
  line("keep_checkpoints", std::to_string(keep_checkpoints));
  std::string widths;
  for (std::size_t i = 0; i < 5; ++i) widths += (i ? ", " : "") + std::to_string(net.widths[i]);
  line("widths", widths);
  line("unified_width", std::to_string(net.unified));
  line("refine_width", std::to_string(net.refine_width));
  line("head_width", std::to_string(net.head_width));
  line("reduction", std::to_string(net.reduction));
  line("init_seed", std::to_string(net.seed));
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw InvalidSpecError(why); };
  if (!(base_lr >= 0.0)) fail("base_lr must be >= 0");
  if (!(lr_decay_factor > 0.0)) fail("lr_decay_factor must be > 0");
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (input_size == 0) fail("input_size must be positive");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(scales[i] > 0.0)) fail("scales must be positive");
    if (round32(input_size * scales[i]) < 32) {
      fail("input_size " + std::to_string(input_size) + " at scale " + fmt(scales[i]) +
           " rounds below 32");
    }
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (!(clip_norm >= 0.0)) fail("clip_norm must be >= 0");
  for (std::size_t w : net.widths)
    if (w == 0) fail("widths must be positive");
  if (net.unified == 0 || net.refine_width == 0 || net.head_width == 0) {
    fail("decoder widths must be positive");
  }
  if (net.reduction == 0 || net.unified / net.reduction == 0) {
    fail("reduction must be in [1, unified_width]");
  }
}

std::size_t TrainConfig::scaled_size(std::size_t scale_index) const {
  return round32(static_cast<double>(input_size) * scales.at(scale_index));
}

std::size_t round32(double x) {
  return static_cast<std::size_t>(std::floor(x / 32.0 + 0.5)) * 32;
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return epoch < cfg.decay_epoch ? cfg.base_lr : cfg.base_lr / cfg.lr_decay_factor;
}

std::size_t draw_scale_index(std::uint64_t seed, std::uint64_t step) {
  return static_cast<std::size_t>(datagen::hash_words(seed, {0x5ca1e, step}) % 3);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t count) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = datagen::hash_words(seed, {0x0bde5, epoch, i}) % i;
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace c2f::train
