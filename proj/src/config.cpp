#include "skelattack/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "skelattack/binary_io.hpp"
#include "skelattack/error.hpp"

namespace skelattack {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const std::string_view item = trim(value.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string format_number(T v) {
  return std::to_string(v);
}

struct Entry {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Entry number(Member member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) {
            std::invoke(member, c) = parse_number<T>(k, v);
          },
          [member](const RunConfig& c) {
            return format_number(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

const std::map<std::string, Entry, std::less<>>& setters() {
  static const std::map<std::string, Entry, std::less<>> table = {
      {"data.classes", number<int>([](RunConfig& c) -> int& { return c.data.class_count; })},
      {"data.per_class", number<int>([](RunConfig& c) -> int& { return c.data.per_class; })},
      {"data.frames", number<int>([](RunConfig& c) -> int& { return c.data.frames; })},
      {"data.seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.data.seed; })},
      {"data.jitter_sigma",
       number<double>([](RunConfig& c) -> auto& { return c.data.jitter_sigma; })},

      {"augment.rotation_max_rad",
       number<double>([](RunConfig& c) -> auto& { return c.augment.rotation_max_rad; })},
      {"augment.scale_min", number<double>([](RunConfig& c) -> auto& { return c.augment.scale_min; })},
      {"augment.scale_max", number<double>([](RunConfig& c) -> auto& { return c.augment.scale_max; })},
      {"augment.jitter_sigma",
       number<double>([](RunConfig& c) -> auto& { return c.augment.jitter_sigma; })},
      {"augment.crop_min", number<double>([](RunConfig& c) -> auto& { return c.augment.crop_min; })},
      {"augment.crop_max", number<double>([](RunConfig& c) -> auto& { return c.augment.crop_max; })},
      {"augment.seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.augment.seed; })},

      {"encoder.epochs", number<int>([](RunConfig& c) -> auto& { return c.encoder.epochs; })},
      {"encoder.lr", number<double>([](RunConfig& c) -> auto& { return c.encoder.learning_rate; })},
      {"encoder.tau", number<double>([](RunConfig& c) -> auto& { return c.encoder.temperature; })},
      {"encoder.queue",
       number<std::size_t>([](RunConfig& c) -> auto& { return c.encoder.queue_size; })},
      {"encoder.momentum", number<double>([](RunConfig& c) -> auto& { return c.encoder.momentum; })},
      {"encoder.weight_decay",
       number<double>([](RunConfig& c) -> auto& { return c.encoder.weight_decay; })},
      {"encoder.hidden", number<std::size_t>([](RunConfig& c) -> auto& { return c.encoder.hidden; })},
      {"encoder.dim",
       number<std::size_t>([](RunConfig& c) -> auto& { return c.encoder.embedding_dim; })},
      {"encoder.seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.encoder.seed; })},
      {"encoder.warm_start_queue",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.encoder.warm_start_queue = parse_bool(k, v);
        },
        [](const RunConfig& c) -> std::string {
          return c.encoder.warm_start_queue ? "true" : "false";
        }}},

      {"manifold.k",
       number<std::size_t>([](RunConfig& c) -> auto& { return c.manifold.kmeans.clusters; })},
      {"manifold.q", number<std::size_t>([](RunConfig& c) -> auto& { return c.manifold.discard; })},
      {"manifold.max_iters",
       number<int>([](RunConfig& c) -> auto& { return c.manifold.kmeans.max_iters; })},
      {"manifold.seed",
       number<std::uint64_t>([](RunConfig& c) -> auto& { return c.manifold.kmeans.seed; })},

      {"attack.strategy",
       {[](RunConfig& c, std::string_view, std::string_view v) {
          c.attack.strategy = parse_strategy(v);
        },
        [](const RunConfig& c) { return std::string(to_string(c.attack.strategy)); }}},
      {"attack.epsilon", number<double>([](RunConfig& c) -> auto& { return c.attack.epsilon; })},
      {"attack.alpha",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.attack.alpha = parse_number<double>(k, v);
        },
        [](const RunConfig& c) {
          return c.attack.alpha ? format_number(*c.attack.alpha) : std::string("epsilon/50");
        }}},
      {"attack.iters", number<int>([](RunConfig& c) -> auto& { return c.attack.iterations; })},
      {"attack.mu", number<double>([](RunConfig& c) -> auto& { return c.attack.momentum; })},
      {"attack.window",
       number<std::size_t>([](RunConfig& c) -> auto& { return c.attack.tvar.window; })},
      {"attack.ridge", number<double>([](RunConfig& c) -> auto& { return c.attack.tvar.ridge; })},
      {"attack.jobs", number<int>([](RunConfig& c) -> auto& { return c.attack_jobs; })},

      {"eval.victim",
       {[](RunConfig& c, std::string_view, std::string_view v) {
          c.eval.victims = split_list(v);
          for (const auto& name : c.eval.victims) parse_victim_kind(name);
        },
        [](const RunConfig& c) {
          std::string out;
          for (const auto& name : c.eval.victims) out += (out.empty() ? "" : ",") + name;
          return out;
        }}},
      {"eval.epochs", number<int>([](RunConfig& c) -> auto& { return c.eval.train.epochs; })},
      {"eval.lr", number<double>([](RunConfig& c) -> auto& { return c.eval.train.learning_rate; })},
      {"eval.hidden",
       number<std::size_t>([](RunConfig& c) -> auto& { return c.eval.train.hidden; })},
      {"eval.seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.eval.train.seed; })},
      {"eval.jobs", number<int>([](RunConfig& c) -> auto& { return c.eval_jobs; })},
  };
  return table;
}

}  // namespace

void RunConfig::set(std::string_view section, std::string_view key, std::string_view value) {
  std::string full(section);
  full += '.';
  full += key;
  const auto& table = setters();
  const auto it = table.find(full);
  if (it == table.end()) throw Error("unknown config key '" + full + "'");
  it->second.set(*this, full, value);
}

void RunConfig::load_text(std::string_view text) {
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::vector<std::string_view> kSections = {
          "data", "augment", "encoder", "manifold", "attack", "eval"};
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw Error("unknown config section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw Error("config line " + std::to_string(line_no) + ": key outside a section");
    }
    set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  load_text(io::read_file(path));
}

std::vector<std::pair<std::string, std::string>> RunConfig::values() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, entry] : setters()) out.emplace_back(k, entry.get(*this));
  return out;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace skelattack
