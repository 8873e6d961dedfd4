#include "cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "skelattack/attack.hpp"
#include "skelattack/binary_io.hpp"
#include "skelattack/config.hpp"
#include "skelattack/contrastive.hpp"
#include "skelattack/dataset_io.hpp"
#include "skelattack/dynamics.hpp"
#include "skelattack/encoder.hpp"
#include "skelattack/error.hpp"
#include "skelattack/evaluation.hpp"
#include "skelattack/manifold.hpp"
#include "skelattack/parallel.hpp"

namespace skelattack::cli {

namespace {

namespace fs = std::filesystem;

constexpr double kVerifySlack = 1e-12;
constexpr const char* kEvalHeader =
    "strategy,victim,epsilon,samples,fooling_rate,delta_p,position,bone,acceleration";

struct UsageError : Error {
  using Error::Error;
};

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--") break;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

std::vector<Tensor3> frames_of(const std::vector<SkeletalSequence>& data) {
  std::vector<Tensor3> out;
  out.reserve(data.size());
  for (const SkeletalSequence& s : data) out.push_back(s.frames());
  return out;
}

std::vector<SkeletalSequence> read_nonempty(const fs::path& path) {
  auto data = read_dataset(path);
  if (data.empty()) throw Error(path.string() + ": dataset is empty");
  return data;
}

// Values the flags write into besides RunConfig.
struct Args {
  std::string config;
  std::string out;
  std::string data;
  std::string encoder;
  std::string manifold;
  std::string clean;
  std::vector<std::string> adv;
  std::vector<std::string> inputs;
  std::string dump_tvar;
  bool verify = false;
  std::string strategy;
  double alpha = 0.0;
  std::string victims;
};

int gen_data(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const auto data = generate_synthetic_dataset(cfg.data);
  write_dataset(a.out, data);
  out << "wrote " << data.size() << " sequences (" << cfg.data.class_count << " classes, "
      << cfg.data.frames << " frames) to " << a.out << '\n';
  return kExitOk;
}

int train_encoder(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const auto data = read_nonempty(a.data);
  const Tensor3& first = data.front().frames();
  ContrastiveTrainer trainer(cfg.encoder, data.front().topology(), first.channels());
  trainer.train(data, cfg.augment);
  write_encoder(a.out, trainer.query_encoder());

  const auto& losses = trainer.loss_trace();
  const std::size_t m = std::max<std::size_t>(1, losses.size() / 10);
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    head += losses[i];
    tail += losses[losses.size() - m + i];
  }
  out << "trained encoder on " << data.size() << " sequences for " << cfg.encoder.epochs
      << " epochs (" << losses.size() << " steps); mean loss first 10% " << fmt(head / m)
      << ", last 10% " << fmt(tail / m) << "; wrote " << a.out << '\n';
  return kExitOk;
}

int build_manifold_cmd(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const ReferenceEncoder encoder = read_encoder(a.encoder);
  const auto data = read_nonempty(a.data);
  const auto frames = frames_of(data);
  const ManifoldIndex index =
      build_manifold(encoder, frames, cfg.manifold.kmeans, cfg.manifold.discard);
  write_manifold(a.out, index);
  out << "clustered " << frames.size() << " embeddings into " << index.centers.size()
      << " centres (discard " << index.discard << ", " << index.wcss_trace.size()
      << " iterations); wrote " << a.out << '\n';
  return kExitOk;
}

std::string attack_sidecar(const AttackConfig& c) {
  std::ostringstream s;
  s << "[attack]\n"
    << "strategy = " << to_string(c.strategy) << '\n'
    << "epsilon = " << fmt(c.epsilon) << '\n'
    << "alpha = " << fmt(c.step_size()) << '\n'
    << "iters = " << c.iterations << '\n'
    << "mu = " << fmt(c.momentum) << '\n'
    << "window = " << c.tvar.window << '\n'
    << "ridge = " << fmt(c.tvar.ridge) << '\n';
  return s.str();
}

int attack_cmd(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const AttackConfig& ac = cfg.attack;
  ac.validate();
  const int order = dynamics_order(ac.strategy);
  if (!a.dump_tvar.empty() && order == 0) {
    throw Error("--dump-tvar needs an SMI strategy; " + std::string(to_string(ac.strategy)) +
                " uses no dynamics");
  }
  const ReferenceEncoder encoder = read_encoder(a.encoder);
  const ManifoldIndex index = read_manifold(a.manifold);
  const auto data = read_nonempty(a.data);

  std::vector<AttackRun> runs(data.size());
  parallel_for(data.size(), cfg.attack_jobs,
               [&](std::size_t i) { runs[i] = run_attack(encoder, index, data[i], ac); });

  std::vector<SkeletalSequence> adversarial;
  adversarial.reserve(data.size());
  std::ostringstream trace;
  trace << "sample,iteration,loss\n";
  trace.precision(17);
  double first_loss = 0.0;
  double last_loss = 0.0;
  double max_dev = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const AttackRun& r = runs[i];
    Tensor3 stored = round_to_float_within(r.adversarial, data[i].frames(), ac.epsilon);
    max_dev = std::max(max_dev, linf_distance(stored, data[i].frames()));
    adversarial.push_back(data[i].without_label().with_frames(std::move(stored)));
    for (std::size_t k = 0; k < r.loss_trace.size(); ++k) {
      trace << i << ',' << k << ',' << r.loss_trace[k] << '\n';
    }
    first_loss += r.loss_trace.front();
    last_loss += r.loss_trace.back();
  }
  write_dataset(a.out, adversarial);
  io::write_file_atomic(a.out + ".trace.csv", trace.str());
  io::write_file_atomic(a.out + ".attack.ini", attack_sidecar(ac));

  if (!a.dump_tvar.empty()) {
    std::ostringstream dump;
    TvarCoefficients::write_csv_header(dump, true);
    for (std::size_t i = 0; i < data.size(); ++i) {
      fit_tvar(order, data[i].frames(), ac.tvar).write_csv_rows(dump, i);
    }
    io::write_file_atomic(a.dump_tvar, dump.str());
  }

  const auto n = static_cast<double>(data.size());
  out << "attacked " << data.size() << " sequences with " << to_string(ac.strategy)
      << " (epsilon " << fmt(ac.epsilon) << ", " << ac.iterations << " iterations); mean loss "
      << fmt(first_loss / n) << " -> " << fmt(last_loss / n) << ", max deviation "
      << fmt(max_dev) << "; wrote " << a.out << '\n';

  if (a.verify) {
    const auto written = read_dataset(a.out);
    const auto source = read_dataset(a.data);
    if (written.size() != source.size()) throw Error("verify: sequence count changed on disk");
    for (std::size_t i = 0; i < written.size(); ++i) {
      const double d = linf_distance(written[i].frames(), source[i].frames());
      if (!(d <= ac.epsilon + kVerifySlack)) {
        throw Error("verify: sequence " + std::to_string(i) + " deviates by " + fmt(d) +
                    ", above epsilon " + fmt(ac.epsilon));
      }
    }
    out << "verify: all " << written.size() << " sequences within epsilon " << fmt(ac.epsilon)
        << '\n';
  }
  return kExitOk;
}

struct AttackLabel {
  std::string strategy;
  double epsilon;
};

// Strategy and budget from the attack's sidecar file, or the file stem and
// the measured maximum deviation when there is none.
AttackLabel label_for(const fs::path& adv_path, std::span<const Tensor3> clean,
                      std::span<const Tensor3> adv) {
  const fs::path sidecar = adv_path.string() + ".attack.ini";
  if (fs::exists(sidecar)) {
    RunConfig c;
    c.load_file(sidecar);
    return {std::string(to_string(c.attack.strategy)), c.attack.epsilon};
  }
  double eps = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    eps = std::max(eps, linf_distance(clean[i], adv[i]));
  }
  return {adv_path.stem().string(), eps};
}

int eval_cmd(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const auto clean = read_nonempty(a.clean);
  const auto clean_frames = frames_of(clean);

  std::vector<std::pair<std::string, VictimClassifier>> victims;
  for (const std::string& name : cfg.eval.victims) {
    victims.emplace_back(name, train_victim(parse_victim_kind(name), clean, cfg.eval.train));
    out << "victim " << name << ": train accuracy " << fmt(victims.back().second.train_accuracy())
        << '\n';
  }

  std::ostringstream csv;
  csv << kEvalHeader << '\n';
  for (const std::string& path : a.adv) {
    const auto adv = read_dataset(path);
    if (adv.size() != clean.size()) {
      throw Error(path + " has " + std::to_string(adv.size()) + " sequences, clean set has " +
                  std::to_string(clean.size()));
    }
    const auto adv_frames = frames_of(adv);
    const AttackLabel label = label_for(path, clean_frames, adv_frames);
    const PerceptualReport p =
        perceptual_deviation(clean_frames, adv_frames, clean.front().topology());
    for (const auto& [name, victim] : victims) {
      const double rate = fooling_rate(victim, clean_frames, adv_frames, cfg.eval_jobs);
      csv << label.strategy << ',' << name << ',' << fmt(label.epsilon) << ',' << p.samples << ','
          << fmt(rate) << ',' << fmt(p.delta_p) << ',' << fmt(p.position_term) << ','
          << fmt(p.bone_term) << ',' << fmt(p.acceleration_term) << '\n';
      out << label.strategy << " vs " << name << ": fooling rate " << fmt(rate) << ", delta_p "
          << fmt(p.delta_p) << '\n';
    }
  }
  io::write_file_atomic(a.out, csv.str());
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

double parse_field(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(where + ": invalid number '" + text + "'");
  }
  return v;
}

struct ReportKey {
  int rank;
  std::string strategy;
  double epsilon;
  friend auto operator<=>(const ReportKey&, const ReportKey&) = default;
};

struct ReportCell {
  std::map<std::string, std::vector<double>> fooling;  // per victim
  std::vector<std::array<double, 4>> perceptual;       // position, bone, accel, delta_p
  std::set<std::string> files;
};

int strategy_rank(const std::string& name) {
  for (std::size_t i = 0; i < std::size(kAllStrategies); ++i) {
    if (to_string(kAllStrategies[i]) == name) return static_cast<int>(i);
  }
  return static_cast<int>(std::size(kAllStrategies));
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

void markdown_table(std::ostream& out, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << ' ' << cells[c] << std::string(width[c] - cells[c].size(), ' ') << " |";
    }
    out << '\n';
  };
  line(header);
  out << '|';
  for (std::size_t w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (const auto& r : rows) line(r);
}

int report_cmd(const Args& a, std::ostream& out) {
  std::map<ReportKey, ReportCell> cells;
  std::vector<std::string> victims;
  for (const std::string& path : a.inputs) {
    std::istringstream in(io::read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kEvalHeader) {
      throw Error(path + ": not an eval CSV (expected header '" + kEvalHeader + "')");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      const std::string where = path + ":" + std::to_string(line_no);
      if (f.size() != 9) throw Error(where + ": expected 9 fields, got " + std::to_string(f.size()));
      ReportKey key{strategy_rank(f[0]), f[0], parse_field(f[2], where)};
      ReportCell& cell = cells[key];
      cell.fooling[f[1]].push_back(parse_field(f[4], where));
      cell.perceptual.push_back({parse_field(f[6], where), parse_field(f[7], where),
                                 parse_field(f[8], where), parse_field(f[5], where)});
      cell.files.insert(path);
      if (std::find(victims.begin(), victims.end(), f[1]) == victims.end()) {
        victims.push_back(f[1]);
      }
    }
  }
  if (cells.empty()) throw Error("no rows in the given eval CSVs");

  std::ostringstream table;
  table << "Fooling rate (%)\n\n";
  std::vector<std::string> header{"strategy", "epsilon", "runs"};
  header.insert(header.end(), victims.begin(), victims.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, cell] : cells) {
    std::vector<std::string> row{key.strategy, fmt(key.epsilon),
                                 std::to_string(cell.files.size())};
    for (const std::string& v : victims) {
      const auto it = cell.fooling.find(v);
      row.push_back(it == cell.fooling.end() ? "-" : fixed(100.0 * mean(it->second), 2));
    }
    rows.push_back(std::move(row));
  }
  markdown_table(table, header, rows);

  table << "\nPerceptual deviation\n\n";
  rows.clear();
  for (const auto& [key, cell] : cells) {
    std::vector<std::string> row{key.strategy, fmt(key.epsilon),
                                 std::to_string(cell.files.size())};
    for (std::size_t k = 0; k < 4; ++k) {
      double s = 0.0;
      for (const auto& p : cell.perceptual) s += p[k];
      row.push_back(fixed(s / static_cast<double>(cell.perceptual.size()), 6));
    }
    rows.push_back(std::move(row));
  }
  markdown_table(table, {"strategy", "epsilon", "runs", "position", "bone", "acceleration",
                         "delta_p"},
                 rows);

  if (a.out.empty()) {
    out << table.str();
  } else {
    io::write_file_atomic(a.out, table.str());
    out << "wrote " << a.out << '\n';
  }
  return kExitOk;
}

std::string victim_list_check(const std::string& value) {
  try {
    for (const std::string& name : split(value, ',')) parse_victim_kind(name);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  Args a;
  try {
    if (const auto path = find_config(args)) cfg.load_file(*path);
  } catch (const UsageError& e) {
    err << "skelattack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "skelattack: error: " << e.what() << '\n';
    return kExitFailure;
  }

  CLI::App app{"No-box adversarial attacks on skeletal motion sequences.", "skelattack"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", a.config,
                 "INI-style settings file ([data] [augment] [encoder] [manifold] [attack] "
                 "[eval]); flags override it");
  {
    std::string footer = "Config keys and current values:\n";
    for (const auto& [key, value] : cfg.values()) footer += "  " + key + " = " + value + "\n";
    app.footer(footer);
  }

  auto* gen = app.add_subcommand("gen-data", "Generate a labelled synthetic motion dataset");
  gen->add_option("--classes", cfg.data.class_count, "number of classes [data.classes]");
  gen->add_option("--per-class", cfg.data.per_class, "sequences per class [data.per_class]");
  gen->add_option("--frames", cfg.data.frames, "frames per sequence [data.frames]");
  gen->add_option("--seed", cfg.data.seed, "generator seed [data.seed]");
  gen->add_option("--jitter", cfg.data.jitter_sigma,
                  "Gaussian joint jitter before scaling [data.jitter_sigma]");
  gen->add_option("--out", a.out, "output dataset file")->required();

  auto* train = app.add_subcommand("train-encoder", "Contrastive training of the encoder");
  train->add_option("--data", a.data, "training dataset (labels ignored)")->required();
  train->add_option("--epochs", cfg.encoder.epochs, "passes over the data [encoder.epochs]");
  train->add_option("--lr", cfg.encoder.learning_rate, "SGD learning rate [encoder.lr]");
  train->add_option("--tau", cfg.encoder.temperature, "InfoNCE temperature [encoder.tau]");
  train->add_option("--queue", cfg.encoder.queue_size, "negative queue length [encoder.queue]");
  train->add_option("--momentum", cfg.encoder.momentum,
                    "key encoder EMA momentum [encoder.momentum]");
  train->add_option("--weight-decay", cfg.encoder.weight_decay,
                    "L2 weight decay [encoder.weight_decay]");
  train->add_option("--hidden", cfg.encoder.hidden, "hidden width [encoder.hidden]");
  train->add_option("--dim", cfg.encoder.embedding_dim, "embedding dimension [encoder.dim]");
  train->add_option("--seed", cfg.encoder.seed, "initialisation seed [encoder.seed]");
  train->add_option("--out", a.out, "output checkpoint file")->required();

  auto* manifold = app.add_subcommand("build-manifold", "Cluster embeddings into a manifold index");
  manifold->add_option("--encoder", a.encoder, "encoder checkpoint")->required();
  manifold->add_option("--data", a.data, "dataset to embed")->required();
  manifold->add_option("--k", cfg.manifold.kmeans.clusters, "number of clusters [manifold.k]");
  manifold->add_option("--q", cfg.manifold.discard,
                       "nearest clusters discarded per query [manifold.q]");
  manifold->add_option("--max-iters", cfg.manifold.kmeans.max_iters,
                       "Lloyd iteration cap [manifold.max_iters]");
  manifold->add_option("--seed", cfg.manifold.kmeans.seed, "k-means++ seed [manifold.seed]");
  manifold->add_option("--out", a.out, "output index file")->required();

  std::vector<std::string> strategy_names;
  for (Strategy s : kAllStrategies) strategy_names.emplace_back(to_string(s));
  a.strategy = std::string(to_string(cfg.attack.strategy));
  a.alpha = cfg.attack.step_size();

  auto* attack = app.add_subcommand("attack", "Run the no-box attack on every sequence");
  attack->add_option("--encoder", a.encoder, "encoder checkpoint")->required();
  attack->add_option("--manifold", a.manifold, "manifold index")->required();
  attack->add_option("--data", a.data, "sequences to attack (labels ignored)")->required();
  attack->add_option("--strategy", a.strategy, "attack strategy [attack.strategy]")
      ->check(CLI::IsMember(strategy_names));
  attack->add_option("--epsilon", cfg.attack.epsilon, "l-infinity budget [attack.epsilon]");
  auto* alpha_opt =
      attack->add_option("--alpha", a.alpha, "step size; epsilon/50 when unset [attack.alpha]");
  if (!cfg.attack.alpha) alpha_opt->default_str("epsilon/50");
  attack->add_option("--iters", cfg.attack.iterations, "iterations [attack.iters]");
  attack->add_option("--mu", cfg.attack.momentum, "momentum decay [attack.mu]");
  attack->add_option("--window", cfg.attack.tvar.window, "TV-AR window, odd [attack.window]");
  attack->add_option("--ridge", cfg.attack.tvar.ridge, "TV-AR ridge penalty [attack.ridge]");
  attack->add_option("--jobs", cfg.attack_jobs, "worker threads [attack.jobs]");
  attack->add_option("--out", a.out,
                     "adversarial dataset; <out>.trace.csv and <out>.attack.ini are written "
                     "next to it")
      ->required();
  attack->add_option("--dump-tvar", a.dump_tvar, "also write fitted TV-AR coefficients as CSV");
  attack->add_flag("--verify", a.verify, "re-read the output and check the epsilon bound");

  a.victims = join(cfg.eval.victims, ",");
  auto* eval = app.add_subcommand("eval", "Fooling rate and perceptual deviation of attacks");
  eval->add_option("--victim", a.victims,
                   "comma-separated victims: encoder-head, frame-mlp [eval.victim]")
      ->check(victim_list_check);
  eval->add_option("--clean", a.clean, "labelled clean dataset; victims train on it")
      ->required();
  eval->add_option("--adv", a.adv, "adversarial dataset(s) aligned with --clean")
      ->required();
  eval->add_option("--epochs", cfg.eval.train.epochs, "victim epochs [eval.epochs]");
  eval->add_option("--lr", cfg.eval.train.learning_rate, "victim learning rate [eval.lr]");
  eval->add_option("--hidden", cfg.eval.train.hidden, "victim hidden width [eval.hidden]");
  eval->add_option("--seed", cfg.eval.train.seed, "victim seed [eval.seed]");
  eval->add_option("--jobs", cfg.eval_jobs, "worker threads [eval.jobs]");
  eval->add_option("--out", a.out, "output CSV")->required();

  auto* report = app.add_subcommand("report", "Summarise eval CSVs as comparison tables");
  report->add_option("inputs", a.inputs, "eval CSV files")->required();
  report->add_option("--out", a.out, "write the tables here instead of stdout");

  if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
      app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "skelattack: unknown subcommand '" << args.front() << "' (see --help)\n";
    return kExitUsage;
  }

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "skelattack: " << e.what() << " (see --help)\n";
    return kExitUsage;
  }

  try {
    cfg.attack.strategy = parse_strategy(a.strategy);
    if (alpha_opt->count() > 0) cfg.attack.alpha = a.alpha;
    cfg.eval.victims = split(a.victims, ',');

    if (gen->parsed()) return gen_data(cfg, a, out);
    if (train->parsed()) return train_encoder(cfg, a, out);
    if (manifold->parsed()) return build_manifold_cmd(cfg, a, out);
    if (attack->parsed()) return attack_cmd(cfg, a, out);
    if (eval->parsed()) return eval_cmd(cfg, a, out);
    return report_cmd(a, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "skelattack: error: " << msg << '\n';
    return kExitFailure;
  }
}

}  // namespace skelattack::cli
